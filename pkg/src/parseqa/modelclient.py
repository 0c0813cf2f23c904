"""Chat-completion client with bounded retries, record/replay transcripts,
judge runs, and refinement-prompt construction.

Replay mode is fully deterministic and network-free; transcripts are one
JSON file per request hash in a store directory.
"""

from __future__ import annotations

import base64
import hashlib
import json
import os
import threading
import time
from concurrent.futures import ThreadPoolExecutor, as_completed
from dataclasses import dataclass, field
from pathlib import Path

from .cocl import render_checklist
from .corpus import ParsingCase
from .taxonomy import error_type_by_id


class ClientError(RuntimeError):
    pass


class AuthError(ClientError):
    pass


class TransportError(ClientError):
    pass


@dataclass
class ClientProfile:
    endpoint: str = ""
    model: str = ""
    auth_env: str = "PARSEQA_API_KEY"
    temperature: float = 0.0
    max_output_tokens: int = 4096
    max_retries: int = 3
    timeout_s: float = 60.0
    max_concurrency: int = 4

    def __post_init__(self):
        if self.temperature < 0:
            raise ClientError("temperature must be >= 0")
        if self.max_retries < 0:
            raise ClientError("retries must be >= 0")
        if self.max_concurrency < 1:
            raise ClientError("concurrency must be >= 1")


@dataclass
class ChatRequest:
    system: str = ""
    user: str = ""
    image_b64: str | None = None
    image_media_type: str = "image/png"
    temperature: float = 0.0
    max_output_tokens: int = 4096

    def canonical_json(self) -> str:
        return json.dumps(
            {
                "system": self.system,
                "user": self.user,
                "image_b64": self.image_b64,
                "image_media_type": self.image_media_type,
                "temperature": self.temperature,
                "max_output_tokens": self.max_output_tokens,
            },
            sort_keys=True,
            ensure_ascii=False,
        )

    def digest(self) -> str:
        return hashlib.sha256(self.canonical_json().encode("utf-8")).hexdigest()


@dataclass
class ChatResponse:
    text: str
    finish_reason: str = "stop"
    usage: dict = field(default_factory=dict)


def _load_image_b64(image_ref: str) -> tuple[str, str] | None:
    path = Path(image_ref)
    if not path.is_file():
        return None
    media = "image/png" if path.suffix.lower() == ".png" else "image/jpeg"
    return base64.b64encode(path.read_bytes()).decode("ascii"), media


class HttpClient:
    """De-facto chat-completions wire shape; retries with exponential
    backoff plus jitter on transport and 429/5xx failures."""

    def __init__(self, profile: ClientProfile):
        self.profile = profile

    def _auth_token(self) -> str:
        token = os.environ.get(self.profile.auth_env, "")
        if not token:
            raise AuthError(f"auth env var {self.profile.auth_env} not set")
        return token

    def complete(self, request: ChatRequest) -> ChatResponse:
        import requests

        token = self._auth_token()
        content: list[dict] = [{"type": "text", "text": request.user}]
        if request.image_b64:
            content.insert(
                0,
                {
                    "type": "image_url",
                    "image_url": {
                        "url": f"data:{request.image_media_type};base64,{request.image_b64}"
                    },
                },
            )
        messages = []
        if request.system:
            messages.append({"role": "system", "content": request.system})
        messages.append({"role": "user", "content": content})
        body = {
            "model": self.profile.model,
            "messages": messages,
            "temperature": request.temperature,
            "max_tokens": request.max_output_tokens,
        }
        delay = 1.0
        last_exc: Exception | None = None
        for attempt in range(self.profile.max_retries + 1):
            try:
                resp = requests.post(
                    self.profile.endpoint,
                    json=body,
                    headers={"Authorization": f"Bearer {token}"},
                    timeout=self.profile.timeout_s,
                )
            except requests.RequestException as exc:
                last_exc = TransportError(str(exc))
            else:
                if resp.status_code == 200:
                    try:
                        payload = resp.json()
                        choice = payload["choices"][0]
                        return ChatResponse(
                            text=choice["message"]["content"],
                            finish_reason=choice.get("finish_reason", "stop"),
                            usage=payload.get("usage", {}),
                        )
                    except (KeyError, ValueError) as exc:
                        raise TransportError(f"malformed response body: {exc}") from exc
                if resp.status_code not in (408, 429) and resp.status_code < 500:
                    raise TransportError(f"HTTP {resp.status_code}: {resp.text[:200]}")
                last_exc = TransportError(f"HTTP {resp.status_code}")
            if attempt < self.profile.max_retries:
                time.sleep(delay * (0.5 + os.urandom(1)[0] / 255))
                delay *= 2
        raise last_exc or TransportError("request failed")

    def complete_text(self, prompt: str, image_ref: str | None = None) -> str:
        image = _load_image_b64(image_ref) if image_ref else None
        req = ChatRequest(
            user=prompt,
            image_b64=image[0] if image else None,
            image_media_type=image[1] if image else "image/png",
            temperature=self.profile.temperature,
            max_output_tokens=self.profile.max_output_tokens,
        )
        return self.complete(req).text


class TranscriptStore:
    """One JSON file per request hash."""

    def __init__(self, root: str | Path):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)

    def _path(self, digest: str) -> Path:
        return self.root / f"{digest}.json"

    def get(self, request: ChatRequest) -> ChatResponse | None:
        path = self._path(request.digest())
        if not path.is_file():
            return None
        obj = json.loads(path.read_text("utf-8"))
        return ChatResponse(**obj["response"])

    def put(self, request: ChatRequest, response: ChatResponse):
        obj = {
            "request": json.loads(request.canonical_json()),
            "response": {
                "text": response.text,
                "finish_reason": response.finish_reason,
                "usage": response.usage,
            },
        }
        self._path(request.digest()).write_text(
            json.dumps(obj, ensure_ascii=False, indent=1), "utf-8"
        )


class ReplayClient:
    """Serves recorded transcripts only; any miss is an error."""

    def __init__(self, store: TranscriptStore, profile: ClientProfile | None = None):
        self.store = store
        self.profile = profile or ClientProfile()

    def complete(self, request: ChatRequest) -> ChatResponse:
        response = self.store.get(request)
        if response is None:
            raise ClientError(f"no transcript for request {request.digest()[:12]}")
        return response

    def complete_text(self, prompt: str, image_ref: str | None = None) -> str:
        req = ChatRequest(
            user=prompt,
            temperature=self.profile.temperature,
            max_output_tokens=self.profile.max_output_tokens,
        )
        return self.complete(req).text


class RecordingClient:
    def __init__(self, inner, store: TranscriptStore):
        self.inner = inner
        self.store = store
        self.profile = inner.profile

    def complete(self, request: ChatRequest) -> ChatResponse:
        cached = self.store.get(request)
        if cached is not None:
            return cached
        response = self.inner.complete(request)
        self.store.put(request, response)
        return response

    def complete_text(self, prompt: str, image_ref: str | None = None) -> str:
        req = ChatRequest(
            user=prompt,
            temperature=self.profile.temperature,
            max_output_tokens=self.profile.max_output_tokens,
        )
        return self.complete(req).text


def judge_prompt_without_cot(case: ParsingCase) -> str:
    return render_checklist(case.element, case.prediction)


def judge_prompt_with_cot(case: ParsingCase) -> str:
    return (
        render_checklist(case.element, case.prediction)
        + "\n\nFirst reason step by step inside <think></think>, then give the answer."
    )


JUDGE_PROMPT_BUILDERS = {
    "with_cot": judge_prompt_with_cot,
    "without_cot": judge_prompt_without_cot,
}

default_judge_prompt = judge_prompt_without_cot


def run_judge(
    client,
    cases: list[ParsingCase],
    out_path: str | Path,
    prompt_builder=default_judge_prompt,
    k: int = 1,
    max_concurrency: int | None = None,
) -> int:
    """Collect k samples per case into a judge-output JSONL. Resumable:
    (case_id, sample_index) pairs already present are skipped."""
    if k < 1:
        raise ClientError("k must be >= 1")
    out_path = Path(out_path)
    done: set[tuple[str, int]] = set()
    if out_path.is_file():
        for line in out_path.read_text("utf-8").splitlines():
            if not line.strip():
                continue
            obj = json.loads(line)
            if "_header" in obj:
                continue
            done.add((obj["case_id"], int(obj["sample_index"])))

    todo = [
        (case, s)
        for case in cases
        for s in range(k)
        if (case.id, s) not in done
    ]
    lock = threading.Lock()
    written = 0
    concurrency = max_concurrency or getattr(client, "profile", ClientProfile()).max_concurrency

    def one(case, sample_index):
        prompt = prompt_builder(case)
        return case.id, sample_index, client.complete_text(
            prompt, image_ref=case.image_ref or None
        )

    with out_path.open("a", encoding="utf-8") as fh:
        with ThreadPoolExecutor(max_workers=concurrency) as pool:
            futures = [pool.submit(one, case, s) for case, s in todo]
            results = []
            for fut in as_completed(futures):
                try:
                    results.append(fut.result())
                except Exception as exc:
                    with lock:
                        fh.write(
                            json.dumps({"error": str(exc)}, ensure_ascii=False) + "\n"
                        )
            # Deterministic output order regardless of completion order.
            for case_id, sample_index, raw in sorted(results, key=lambda r: (r[0], r[1])):
                fh.write(
                    json.dumps(
                        {"case_id": case_id, "sample_index": sample_index, "raw": raw},
                        ensure_ascii=False,
                    )
                    + "\n"
                )
                written += 1
    return written


REFINER_MODES = ("no_guidance", "binary_guidance", "detailed_guidance")
REFINE_SKIP_SENTINEL = "__SKIP__: refine only the bad cases"

_REFINER_ROLE = (
    "You are an expert in document image analysis and correction with a highly "
    "developed visual understanding ability, specialized in precise structural "
    "analysis of complex document elements, including tables and mathematical "
    "formulas. Your task is to perform precise and complete corrections on the "
    "original OCR results based on the provided document image, the type of "
    "elements in the image, the original OCR output{feedback_clause}, ultimately "
    "delivering the highest quality parsed content and accurate element structure."
)

_REFINER_OUTPUT_RULES = """Output Format:
- Wrap your internal thought process in <think> tags and the final corrected result in <answer> tags.
- Text: output the corrected plain text, keeping grammar, spelling, and formatting consistent with the document.
- Tables (strict HTML): output the corrected table using <table>, <tr>, <td>, <th>. Reproduce merged cells with colspan/rowspan, use <th> for header cells, and strictly avoid generating any CSS styles or presentational attributes.
- Mathematical formulas: output the corrected formula in LaTeX, with attention to symbols, operators, and structure."""


def build_refiner_prompt(mode: str, case: ParsingCase, judge_output=None) -> str:
    if mode not in REFINER_MODES:
        raise ClientError(f"unknown refiner mode: {mode!r}")
    if mode != "no_guidance":
        if judge_output is None:
            raise ClientError(f"mode {mode} requires a judge output")
        if judge_output.verdict == "good" and not judge_output.detected:
            return REFINE_SKIP_SENTINEL

    detailed = mode == "detailed_guidance"
    feedback_clause = (
        ", and the quality control feedback" if detailed else ""
    )
    parts = [_REFINER_ROLE.format(feedback_clause=feedback_clause), ""]
    parts.append(f"Element type: {case.element.value}")
    parts.append("Original OCR result:")
    parts.append(case.prediction)
    parts.append("")
    if detailed:
        parts.append("Quality Control Feedback (errors found by the quality model):")
        for type_id in sorted(judge_output.detected):
            etype = error_type_by_id(type_id)
            parts.append(f"- {etype.display_name}: {etype.definition}")
        parts.append(
            "Correction Principles: prioritize the quality control feedback above, "
            "but verify every correction against the document image so no new "
            "errors are introduced and correct content is left unchanged."
        )
    else:
        parts.append(
            "Determine if there are errors in the content. If errors exist, perform "
            "corrections to obtain a more accurate output result, ensuring no new "
            "errors are introduced; otherwise, directly output the original result."
        )
    parts.append("")
    parts.append(_REFINER_OUTPUT_RULES)
    parts.append("")
    parts.append("Let's begin!")
    return "\n".join(parts)

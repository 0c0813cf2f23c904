"""Single command-line entry point for every pipeline stage.

Exit codes: 0 success, 1 validation failure (bad input data, bad flags),
2 I/O or client failure. Diagnostics go to stderr; data to stdout or
``--out``. File arguments accept ``-`` for stdin. Synthesis outputs start
with a header record carrying toolkit version, config hash, and seed.
"""

from __future__ import annotations

import contextlib
import hashlib
import json
import sys
try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib
from dataclasses import dataclass, field
from pathlib import Path

import click

from . import __version__, cocl, composer, metrics, modelclient, reward, synth_llm
from .corpus import (
    CorpusError,
    compute_stats,
    read_cases,
    read_records,
    write_cases,
)
from .objective import alignment_report, default_metric
from .perturb_latex import LatexError, tokenize_latex, validate_balanced
from .taxonomy import (
    CompatibilityPolicy,
    ElementKind,
    SynthesisMode,
    TaxonomyError,
    all_error_types,
    error_type_by_id,
)


class ConfigError(ValueError):
    pass


_KNOWN_SECTIONS = {"dataset_seed", "paths", "target", "policy", "clients", "rules"}


@dataclass
class GlobalConfig:
    dataset_seed: int | None = None
    paths: dict = field(default_factory=dict)
    target: composer.DistributionTarget | None = None
    policy: CompatibilityPolicy = field(default_factory=CompatibilityPolicy)
    clients: dict = field(default_factory=dict)
    rules: dict = field(default_factory=dict)
    raw: dict = field(default_factory=dict)

    @property
    def config_hash(self) -> str:
        blob = json.dumps(self.raw, sort_keys=True, ensure_ascii=False)
        return hashlib.sha256(blob.encode("utf-8")).hexdigest()[:12]


def load_config(path: str | None) -> GlobalConfig:
    if path is None:
        return GlobalConfig()
    try:
        data = tomllib.loads(Path(path).read_text("utf-8"))
    except (OSError, tomllib.TOMLDecodeError) as exc:
        raise ConfigError(f"cannot load config {path}: {exc}") from exc
    unknown = set(data) - _KNOWN_SECTIONS
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    cfg = GlobalConfig(raw=data)
    if "dataset_seed" in data:
        cfg.dataset_seed = int(data["dataset_seed"])
    cfg.paths = dict(data.get("paths", {}))
    cfg.clients = dict(data.get("clients", {}))
    cfg.rules = dict(data.get("rules", {}))
    if "target" in data:
        t = data["target"]
        cfg.target = composer.DistributionTarget(
            good_fraction=float(t["good_fraction"]),
            single_fraction=float(t["single_fraction"]),
            multi_fraction=float(t["multi_fraction"]),
            multi_size_weights={
                int(k): float(v) for k, v in t.get("multi_size_weights", {2: 0.6, 3: 0.3, 4: 0.1}).items()
            },
            per_type_weights=dict(t.get("per_type_weights", {})),
        )
    if "policy" in data:
        p = data["policy"]
        cfg.policy = CompatibilityPolicy(
            max_errors_per_case=int(p.get("max_errors_per_case", 4)),
            min_errors_per_multicase=int(p.get("min_errors_per_multicase", 2)),
            forbidden_pairs=frozenset(
                tuple(pair) for pair in p.get("forbidden_pairs", [])
            ),
        )
    return cfg


@contextlib.contextmanager
def _open_in(path: str):
    if path == "-":
        yield sys.stdin
    else:
        with open(path, "r", encoding="utf-8") as fh:
            yield fh


@contextlib.contextmanager
def _open_out(path: str | None):
    if path is None or path == "-":
        yield sys.stdout
    else:
        with open(path, "w", encoding="utf-8") as fh:
            yield fh


def _header(cfg: GlobalConfig, seed: int | None) -> dict:
    return {"version": __version__, "config_hash": cfg.config_hash, "seed": seed}


def _element_kind(name: str) -> ElementKind:
    try:
        return ElementKind(name)
    except ValueError:
        raise click.UsageError(f"unknown element: {name!r}")


@click.group(name="parseqa", no_args_is_help=False)
@click.option("--config", "config_path", type=str, default=None, help="TOML config file.")
@click.version_option(version=__version__)
@click.pass_context
def cli(ctx, config_path):
    ctx.obj = load_config(config_path)


# --- taxonomy -----------------------------------------------------------


@cli.group()
def taxonomy():
    """Inspect the error-type manifest."""


@taxonomy.command("list")
@click.option("--element", type=str, default=None)
@click.option("--json", "as_json", is_flag=True)
def taxonomy_list(element, as_json):
    kind = _element_kind(element) if element else None
    types = all_error_types(kind)
    if as_json:
        click.echo(
            json.dumps(
                [
                    {
                        "id": t.id,
                        "element": t.element.value,
                        "level": t.level.id,
                        "display_name": t.display_name,
                        "definition": t.definition,
                        "synthesis_mode": t.synthesis_mode.value,
                        "exclusivity_class": t.exclusivity_class.value,
                    }
                    for t in types
                ],
                ensure_ascii=False,
                indent=1,
            )
        )
    else:
        for t in types:
            click.echo(f"{t.id:<42}{t.element.value:<10}{t.level.id:<28}{t.display_name}")


# --- corpus -------------------------------------------------------------


@cli.group()
def corpus():
    """Validate and summarize case files."""


@corpus.command("stats")
@click.argument("file", type=str)
@click.option("--json", "as_json", is_flag=True)
def corpus_stats(file, as_json):
    with _open_in(file) as fh:
        stats = compute_stats(read_cases(fh))
    obj = stats.to_json()
    if as_json:
        click.echo(json.dumps(obj, ensure_ascii=False, indent=1))
    else:
        click.echo(f"total cases:  {stats.total}")
        for k, v in sorted(stats.per_element.items()):
            click.echo(f"  {k}: {v}")
        click.echo(f"good fraction:   {stats.good_fraction:.4f}")
        click.echo(f"single fraction: {stats.single_error_fraction:.4f}")
        click.echo(f"multi fraction:  {stats.multi_error_fraction:.4f}")


@corpus.command("validate")
@click.argument("file", type=str)
@click.option("--records", "is_records", is_flag=True, help="Validate a records file.")
def corpus_validate(file, is_records):
    with _open_in(file) as fh:
        if is_records:
            records = read_records(fh)
            for rec in records:
                rec.validate()
            click.echo(f"OK: {len(records)} records", err=True)
        else:
            cases = read_cases(fh)
            click.echo(f"OK: {len(cases)} cases", err=True)


# --- synth --------------------------------------------------------------


@cli.group()
def synth():
    """Generate labeled error cases."""


def _synth_rule_based(cfg, element, error, seed, records_path, out):
    etype = error_type_by_id(error)
    if etype.element is not element:
        raise click.UsageError(f"{error} is not a {element.value} error type")
    if etype.synthesis_mode is not SynthesisMode.RULE_BASED:
        raise click.UsageError(f"{error} is not rule-based; use `synth llm`")
    with _open_in(records_path) as fh:
        records = [r for r in read_records(fh) if r.element is element]
    donor_pool = [(r.id, r.ground_truth) for r in records]
    cases = []
    for rec in records:
        try:
            cases.append(
                composer.compose_case(
                    rec,
                    [error],
                    dataset_seed=seed,
                    case_id=f"{rec.id}:{error}",
                    policy=cfg.policy,
                    donor_pool=donor_pool,
                )
            )
        except composer.ComposeError as exc:
            click.echo(f"skip {rec.id}: {exc}", err=True)
    with _open_out(out) as fh:
        write_cases(cases, fh, header=_header(cfg, seed))
    click.echo(f"wrote {len(cases)} cases", err=True)


@synth.command("text")
@click.option("--error", required=True)
@click.option("--seed", type=int, required=True)
@click.option("--records", "records_path", required=True, type=str)
@click.option("--out", type=str, default=None)
@click.pass_obj
def synth_text(cfg, error, seed, records_path, out):
    _synth_rule_based(cfg, ElementKind.TEXT, error, seed, records_path, out)


@synth.command("table")
@click.option("--error", required=True)
@click.option("--seed", type=int, required=True)
@click.option("--records", "records_path", required=True, type=str)
@click.option("--out", type=str, default=None)
@click.pass_obj
def synth_table(cfg, error, seed, records_path, out):
    _synth_rule_based(cfg, ElementKind.TABLE, error, seed, records_path, out)


def _build_client(cfg, profile_name, transcripts, endpoint, model):
    prof_cfg = cfg.clients.get(profile_name, {}) if profile_name else {}
    profile = modelclient.ClientProfile(
        endpoint=endpoint or prof_cfg.get("endpoint", ""),
        model=model or prof_cfg.get("model", ""),
        auth_env=prof_cfg.get("auth_env", "PARSEQA_API_KEY"),
        temperature=float(prof_cfg.get("temperature", 0.0)),
        max_output_tokens=int(prof_cfg.get("max_output_tokens", 4096)),
        max_retries=int(prof_cfg.get("max_retries", 3)),
        timeout_s=float(prof_cfg.get("timeout_s", 60.0)),
        max_concurrency=int(prof_cfg.get("max_concurrency", 4)),
    )
    store = modelclient.TranscriptStore(transcripts) if transcripts else None
    if not profile.endpoint:
        if store is None:
            raise click.UsageError("need either --endpoint/--client or --transcripts")
        return modelclient.ReplayClient(store, profile)
    http = modelclient.HttpClient(profile)
    return modelclient.RecordingClient(http, store) if store else http


@synth.command("llm")
@click.option("--error", required=True)
@click.option("--records", "records_path", required=True, type=str)
@click.option("--out", type=str, default=None)
@click.option("--client", "profile_name", type=str, default=None)
@click.option("--transcripts", type=str, default=None, help="Record/replay store dir.")
@click.option("--endpoint", type=str, default=None)
@click.option("--model", type=str, default=None)
@click.pass_obj
def synth_llm_cmd(cfg, error, records_path, out, profile_name, transcripts, endpoint, model):
    client = _build_client(cfg, profile_name, transcripts, endpoint, model)
    etype = error_type_by_id(error)
    with _open_in(records_path) as fh:
        records = [r for r in read_records(fh) if r.element is etype.element]
    cases = []
    for rec in records:
        try:
            case = synth_llm.synthesize_case(rec, error, client, case_id=f"{rec.id}:{error}")
        except synth_llm.SynthesisError as exc:
            click.echo(f"skip {rec.id}: {exc}", err=True)
            continue
        if case is not None:
            cases.append(case)
    with _open_out(out) as fh:
        write_cases(cases, fh, header=_header(cfg, cfg.dataset_seed))
    click.echo(f"wrote {len(cases)} cases", err=True)


# --- compose ------------------------------------------------------------


@cli.command("compose")
@click.option("--records", "records_path", required=True, type=str)
@click.option("--seed", type=int, default=None)
@click.option("--n", type=int, default=None)
@click.option("--preset", type=click.Choice(["paper-2024"]), default="paper-2024")
@click.option("--rule-based-only/--all-modes", default=True)
@click.option("--out", type=str, default=None)
@click.pass_obj
def compose_cmd(cfg, records_path, seed, n, preset, rule_based_only, out):
    seed = seed if seed is not None else cfg.dataset_seed
    if seed is None:
        raise click.UsageError("a --seed (or config dataset_seed) is required")
    target = cfg.target or composer.PAPER_TARGET
    with _open_in(records_path) as fh:
        records = read_records(fh)
    by_id = {r.id: r for r in records}
    donor_pool = [(r.id, r.ground_truth) for r in records if r.element is ElementKind.TEXT]
    from .rng import make_rng

    plans = composer.sample_plan(
        records, target, make_rng(seed), n=n,
        rule_based_only=rule_based_only, policy=cfg.policy,
    )
    cases = []
    for i, (rec_id, types) in enumerate(plans):
        rec = by_id[rec_id]
        case_id = f"case-{i:06d}"
        if not types:
            from .corpus import ParsingCase

            cases.append(
                ParsingCase(
                    id=case_id,
                    element_record_id=rec.id,
                    element=rec.element,
                    ground_truth=rec.ground_truth,
                    prediction=rec.ground_truth,
                    gold_errors=set(),
                    provenance="rule_based",
                    image_ref=rec.image_ref,
                )
            )
            continue
        try:
            cases.append(
                composer.compose_case(
                    rec, types, dataset_seed=seed, case_id=case_id,
                    policy=cfg.policy, donor_pool=donor_pool,
                )
            )
        except composer.ComposeError as exc:
            click.echo(f"skip {case_id}: {exc}", err=True)
    with _open_out(out) as fh:
        write_cases(cases, fh, header=_header(cfg, seed))
    click.echo(f"wrote {len(cases)} cases", err=True)


# --- cocl ---------------------------------------------------------------


@cli.group("cocl")
def cocl_grp():
    """Checklist prompts and judge-output parsing."""


@cocl_grp.command("render")
@click.option("--element", required=True)
@click.argument("file", type=str)
def cocl_render(element, file):
    with _open_in(file) as fh:
        content = fh.read()
    click.echo(cocl.render_checklist(_element_kind(element), content))


@cocl_grp.command("parse")
@click.argument("file", type=str)
def cocl_parse(file):
    with _open_in(file) as fh:
        raw = fh.read()
    click.echo(json.dumps(cocl.parse_judge_output(raw).to_json(), ensure_ascii=False, indent=1))


# --- judge --------------------------------------------------------------


@cli.group()
def judge():
    """Run a judge model over cases."""


@judge.command("run")
@click.option("--cases", "cases_path", required=True, type=str)
@click.option("--out", required=True, type=str)
@click.option("--k", type=int, default=1)
@click.option("--prompt", type=click.Choice(sorted(modelclient.JUDGE_PROMPT_BUILDERS)), default="without_cot")
@click.option("--client", "profile_name", type=str, default=None)
@click.option("--transcripts", type=str, default=None)
@click.option("--endpoint", type=str, default=None)
@click.option("--model", type=str, default=None)
@click.pass_obj
def judge_run(cfg, cases_path, out, k, prompt, profile_name, transcripts, endpoint, model):
    client = _build_client(cfg, profile_name, transcripts, endpoint, model)
    with _open_in(cases_path) as fh:
        cases = read_cases(fh)
    n = modelclient.run_judge(
        client, cases, out,
        prompt_builder=modelclient.JUDGE_PROMPT_BUILDERS[prompt], k=k,
    )
    click.echo(f"wrote {n} judge outputs", err=True)


# --- score / reward / align --------------------------------------------


def _load_judgments(gold_path, pred_path):
    with _open_in(gold_path) as fh:
        cases = {c.id: c for c in read_cases(fh)}
    samples: dict[str, list[tuple[int, cocl.JudgeOutput]]] = {}
    with _open_in(pred_path) as fh:
        for lineno, raw in enumerate(fh, start=1):
            raw = raw.strip()
            if not raw:
                continue
            obj = json.loads(raw)
            if "_header" in obj or "error" in obj:
                continue
            if obj["case_id"] not in cases:
                raise CorpusError(f"unknown case_id {obj['case_id']!r}", lineno)
            samples.setdefault(obj["case_id"], []).append(
                (int(obj.get("sample_index", 0)), cocl.parse_judge_output(obj["raw"]))
            )
    judgments = []
    for case_id, case in cases.items():
        if case_id not in samples:
            continue
        preds = [p for _, p in sorted(samples[case_id], key=lambda t: t[0])]
        judgments.append(
            metrics.CaseJudgment(
                case_id=case_id,
                gold_errors=set(case.gold_errors),
                predictions=preds,
                element=case.element,
            )
        )
    return cases, judgments


@cli.command("score")
@click.option("--gold", required=True, type=str)
@click.option("--pred", required=True, type=str)
@click.option("--k", type=int, default=1)
@click.option("--best-of", is_flag=True)
@click.option("--json", "as_json", is_flag=True)
def score_cmd(gold, pred, k, best_of, as_json):
    _, judgments = _load_judgments(gold, pred)
    if not judgments:
        raise CorpusError("no overlapping cases between gold and predictions")
    report = metrics.build_report(judgments)
    obj = report.to_json()
    if k > 1:
        r, p, f = metrics.pass_at_k(judgments, k, best_of=best_of)
        obj["pass_at_k"] = {"k": k, "best_of": best_of, "recall": r, "precision": p, "f1": f}
    if as_json:
        click.echo(json.dumps(obj, ensure_ascii=False, indent=1))
    else:
        click.echo(report.render_table())
        if k > 1:
            pk = obj["pass_at_k"]
            click.echo(
                f"pass@{k}{' (best-of)' if best_of else ''}: "
                f"R={pk['recall']:.4f} P={pk['precision']:.4f} F1={pk['f1']:.4f}"
            )


@cli.command("reward")
@click.option("--gold", required=True, type=str)
@click.option("--pred", required=True, type=str)
@click.option("--json", "as_json", is_flag=True)
def reward_cmd(gold, pred, as_json):
    _, judgments = _load_judgments(gold, pred)
    rows = []
    for j in judgments:
        score = reward.asymmetric_reward(j.gold_errors, j.predictions[0])
        rows.append(
            {
                "case_id": j.case_id,
                "branch": score.branch,
                "total": score.total,
                "s_format": score.s_format,
                "s_f1": score.s_f1,
                "s_recall": score.s_recall,
                "s_precision": score.s_precision,
            }
        )
    mean = sum(r["total"] for r in rows) / len(rows) if rows else 0.0
    if as_json:
        click.echo(json.dumps({"cases": rows, "mean_total": mean}, ensure_ascii=False, indent=1))
    else:
        for r in rows:
            click.echo(f"{r['case_id']:<30}{r['branch']:<6}{r['total']:.6f}")
        click.echo(f"mean total: {mean:.6f}")


@cli.command("align")
@click.option("--gold", required=True, type=str)
@click.option("--pred", required=True, type=str)
@click.option("--json", "as_json", is_flag=True)
def align_cmd(gold, pred, as_json):
    cases, judgments = _load_judgments(gold, pred)
    pairs = [(cases[j.case_id], j.predictions[0]) for j in judgments]
    report = alignment_report(pairs, metric=default_metric, metric_name="distance/TEDS")
    if as_json:
        click.echo(json.dumps(report.to_json(), ensure_ascii=False, indent=1))
    else:
        click.echo(report.render_table())


# --- refine-prompt / latex ---------------------------------------------


@cli.command("refine-prompt")
@click.option("--mode", type=click.Choice(modelclient.REFINER_MODES), required=True)
@click.option("--cases", "cases_path", required=True, type=str)
@click.option("--case-id", required=True, type=str)
@click.option("--judge-raw", type=str, default=None, help="File with the raw judge output.")
def refine_prompt_cmd(mode, cases_path, case_id, judge_raw):
    with _open_in(cases_path) as fh:
        cases = {c.id: c for c in read_cases(fh)}
    if case_id not in cases:
        raise CorpusError(f"unknown case id {case_id!r}")
    judge_output = None
    if judge_raw is not None:
        with _open_in(judge_raw) as fh:
            judge_output = cocl.parse_judge_output(fh.read())
    click.echo(modelclient.build_refiner_prompt(mode, cases[case_id], judge_output))


@cli.group()
def latex():
    """LaTeX utilities."""


@latex.command("validate")
@click.argument("file", type=str)
def latex_validate(file):
    with _open_in(file) as fh:
        src = fh.read()
    tokens = tokenize_latex(src)
    if not validate_balanced(tokens):
        raise LatexError("unbalanced braces or \\left/\\right pairs")
    click.echo(f"OK: {len(tokens)} tokens", err=True)


_VALIDATION_ERRORS = (
    CorpusError,
    TaxonomyError,
    LatexError,
    ConfigError,
    composer.ComposeError,
    metrics.MetricsError,
    synth_llm.SynthesisError,
    ValueError,
)


def main(argv=None) -> int:
    try:
        cli.main(args=argv, standalone_mode=False)
    except click.UsageError as exc:
        click.echo(exc.format_message(), err=True)
        if exc.ctx is not None:
            click.echo(exc.ctx.get_usage(), err=True)
        return 1
    except click.ClickException as exc:
        exc.show()
        return 1
    except click.exceptions.Exit as exc:
        return exc.exit_code
    except click.exceptions.Abort:
        return 1
    except modelclient.ClientError as exc:
        click.echo(f"client error: {exc}", err=True)
        return 2
    except OSError as exc:
        click.echo(f"I/O error: {exc}", err=True)
        return 2
    except _VALIDATION_ERRORS as exc:
        click.echo(f"error: {exc}", err=True)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())

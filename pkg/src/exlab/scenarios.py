"""Scenario pipelines: train, serve, steal, defend and verify.

Each run writes into ``<out>/<scenario>-<config hash>/``:

``results.csv``
    one row per metric, every row tagged with the config hash
``verdicts.json``
    a list of ownership-test objects
``config.yaml``
    the fully resolved config, so any row can be regenerated
``checkpoints/``
    trained models

Reruns with the same config overwrite the directory with identical bytes.
"""

from __future__ import annotations

import csv
import io
import json
import shutil
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .config import ConfigError, ExperimentConfig, load_config, numeric_field, parse_config, read_config_data, set_path
from .defenses.active import NoiseConfig, PoisonConfig, attacker_grad, legit_grad, poison
from .defenses.detect import DetectorConfig, calibrate_threshold, make_eval_pairs, pair_scores, threshold_sweep
from .defenses.reactive import (
    bootstrap_rates,
    di_scores,
    di_test,
    ownership_ttest,
    rep_distance,
    verdict_json,
)
from .exceptions import NumericError, ParameterError
from .extraction import AttackConfig, evaluate_stolen, recreate_head, steal_direct, steal_with_head
from .linear_eval import LinearProbe, top1, train_probe
from .nn import build_mlp, save_checkpoint
from .pow import DifficultyPolicy, PuzzleIssuer, attempts_used, solve, verify
from .serving import NoiseDefense, PowGate, RepresentationAPI, ServeConfig, SimilarityDefense
from .supervised import SupervisedClassifier
from .synthdata import generate, make_query_pool, other_family
from .victim import Architecture, VictimModel, train_victim, train_victim_watermarked, watermark_accuracy

FIELDS = ("config_hash", "scenario", "metric", "value", "task", "budget", "loss_kind", "defense")
_SEED_NAMES = ("victim", "attack", "independent", "probe", "detect", "watermark", "inference", "poison", "pow", "serve")


class CheckpointMissing(ConfigError, FileNotFoundError):
    pass


@dataclass
class ResultRow:
    config_hash: str
    scenario: str
    metric: str
    value: float
    task: str = ""
    budget: str = ""
    loss_kind: str = ""
    defense: str = ""

    def as_dict(self):
        return {name: getattr(self, name) for name in FIELDS}


@dataclass
class RunResult:
    out_dir: Path
    rows: list
    verdicts: list
    seconds: float = 0.0

    def value(self, metric, task=""):
        for row in self.rows:
            if row.metric == metric and row.task == task:
                return row.value
        raise KeyError(f"no metric {metric!r} for task {task!r}")


@dataclass
class _Context:
    cfg: ExperimentConfig
    out_dir: Path
    rows: list = field(default_factory=list)
    verdicts: list = field(default_factory=list)
    cache: dict = field(default_factory=dict)

    def __post_init__(self):
        states = np.random.SeedSequence(self.cfg.seed).generate_state(len(_SEED_NAMES))
        self.seeds = {name: int(s) for name, s in zip(_SEED_NAMES, states)}
        self.hash = self.cfg.config_hash()

    def add(self, metric, value, task="", **meta):
        defense = meta.get("defense", _defense_tag(self.cfg))
        self.rows.append(
            ResultRow(
                self.hash,
                self.cfg.scenario,
                metric,
                float(value),
                task,
                str(meta.get("budget", "")),
                str(meta.get("loss_kind", "")),
                defense,
            )
        )

    def add_verdict(self, text):
        self.verdicts.append(json.loads(text))

    @property
    def checkpoint_dir(self):
        path = self.out_dir / "checkpoints"
        path.mkdir(parents=True, exist_ok=True)
        return path


def _defense_tag(cfg):
    return "+".join(d.kind for d in cfg.serve.defenses) or "none"


# -- shared pipeline stages -----------------------------------------------------------


def _data(ctx):
    if "data" not in ctx.cache:
        ctx.cache["data"] = generate(ctx.cfg.data.build())
    return ctx.cache["data"]


def _victim(ctx, watermark=False):
    """The run's victim, loaded or trained once.

    ``watermark=True`` demands an augmentation predictor; full pipelines
    train a watermarked victim from the start so every stage shares it.
    """
    cfg = ctx.cfg.victim
    if "victim" not in ctx.cache:
        data = _data(ctx)
        if cfg.checkpoint:
            victim = VictimModel.load(cfg.checkpoint)
            if victim.input_dim != data["train"].X.shape[1]:
                raise ConfigError(
                    f"checkpoint expects {victim.input_dim} pixels, data has {data['train'].X.shape[1]}",
                    "victim.checkpoint",
                )
        else:
            wm = cfg.watermark or watermark or ctx.cfg.scenario == "full_pipeline"
            victim = _train_ssl(ctx, ctx.seeds["victim"], wm)
            victim.save(ctx.checkpoint_dir / "victim")
        ctx.cache["victim"] = victim
    victim = ctx.cache["victim"]
    if watermark and victim.aug_predictor is None:
        raise ConfigError("this scenario needs a watermarked victim", "victim.checkpoint")
    return victim


def _train_ssl(ctx, seed, watermark):
    cfg = ctx.cfg.victim
    args = dict(
        policy=cfg.policy.build(),
        arch=cfg.architecture(),
        opt=cfg.optimizer.build(),
        epochs=cfg.epochs,
        batch=cfg.batch_size,
        tau=cfg.temperature,
        seed=seed,
    )
    train = _data(ctx)["train"]
    if watermark:
        return train_victim_watermarked(train, lambda_wm=cfg.lambda_wm, **args)
    return train_victim(train, **args)


def _independent(ctx):
    """A model trained like the victim on the same data but from another seed."""
    if "independent" not in ctx.cache:
        ctx.cache["independent"] = _train_ssl(ctx, ctx.seeds["independent"], watermark=False)
    return ctx.cache["independent"]


def _serve_config(ctx):
    defenses = []
    for d in ctx.cfg.serve.defenses:
        if d.kind == "noise":
            defenses.append(NoiseDefense(NoiseConfig(d.mean, d.sigma)))
        elif d.kind == "similarity_perturb":
            defenses.append(
                SimilarityDefense(DetectorConfig(d.metric, d.threshold, d.space), NoiseConfig(d.big_mean, d.big_sigma))
            )
        else:
            defenses.append(PowGate(DifficultyPolicy(d.base_bits, d.increment_bits_per_flag, d.cap_bits)))
    return ServeConfig(ctx.cfg.serve.expose, tuple(defenses), ctx.cfg.serve.logging, ctx.seeds["serve"])


def _pool(ctx):
    a = ctx.cfg.attack
    data = _data(ctx)
    if a.pool in ("fresh", "in_distribution"):
        # fresh: an independent draw the size of the victim's training split
        source = generate(ctx.cfg.data.build(seed_offset=1))["train"] if a.pool == "fresh" else data["test"]
        size = a.pool_size or len(source)
        if size > len(source):
            raise ConfigError(f"the {a.pool} pool has only {len(source)} images", "attack.pool_size")
        idx = np.random.default_rng(ctx.seeds["attack"]).permutation(len(source))[:size]
        return source.images[idx], source.labels[idx]
    size = a.pool_size or len(data["train"])
    return make_query_pool(data["test"], "out_distribution", size, ctx.seeds["attack"]), None


def _attack_config(ctx, labels, budget=None):
    a = ctx.cfg.attack
    arch = None
    if a.rep_dim is not None or a.hidden is not None:
        arch = Architecture(hidden=tuple(a.hidden or ctx.cfg.victim.hidden), rep_dim=a.rep_dim or ctx.cfg.victim.rep_dim)
    if a.loss == "sup_con" and labels is None:
        raise ConfigError("sup_con needs a labelled pool (fresh or in_distribution)", "attack.loss")
    return AttackConfig(
        loss=a.loss_kind(),
        query_budget=a.query_budget if budget is None else budget,
        policy=a.policy.build(),
        architecture=arch,
        optimizer=a.optimizer.build(),
        epochs=a.epochs,
        batch_size=a.batch_size,
        seed=ctx.seeds["attack"],
        labels=labels if a.loss == "sup_con" else None,
    )


def _steal(ctx, victim):
    """Run the configured attack once per run; returns ``(stolen, api)``."""
    if "stolen" not in ctx.cache:
        ctx.cache["stolen"] = _run_attack(ctx, victim)
    return ctx.cache["stolen"]


def _run_attack(ctx, victim):
    a = ctx.cfg.attack
    api = RepresentationAPI(victim, _serve_config(ctx))
    pool, labels = _pool(ctx)
    if a.mode == "direct":
        return steal_direct(api, pool, _attack_config(ctx, labels)), api
    if a.mode == "access_head":
        if ctx.cfg.serve.expose != "projections_z":
            raise ConfigError("access_head needs serve.expose = projections_z", "attack.mode")
        v = ctx.cfg.victim
        rng = np.random.default_rng(ctx.seeds["attack"] + 1)
        head = build_mlp([a.rep_dim or v.rep_dim, v.head_hidden, api.output_dim], rng)
        return steal_with_head(api, head, pool, _attack_config(ctx, labels), mode="access_head"), api
    if ctx.cfg.serve.expose != "representations_y":
        raise ConfigError("recreated_head needs serve.expose = representations_y", "attack.mode")
    half = _attack_config(ctx, labels, budget=a.query_budget // 2)
    if half.policy.is_empty:
        raise ConfigError("recreated_head needs a non-empty attack.policy", "attack.policy")
    head, spent = recreate_head(api, pool, half)
    cfg = _attack_config(ctx, labels, budget=a.query_budget - spent)
    stolen = steal_with_head(api, head, pool, cfg, mode="recreated_head")
    stolen.queries_spent += spent
    return stolen, api


def _steal_meta(ctx):
    return {"budget": ctx.cfg.attack.query_budget, "loss_kind": ctx.cfg.attack.loss}


def _downstream(ctx):
    data = _data(ctx)
    other = generate(other_family(ctx.cfg.data.build()))
    return {
        data["train"].spec.family: (data["train"], data["test"]),
        other["train"].spec.family: (other["train"], other["test"]),
    }


def _watermark_verdict(ctx, name, encoder, predictor):
    rng = np.random.default_rng(ctx.seeds["watermark"])
    images = _data(ctx)["test"].images
    rates = bootstrap_rates(encoder, predictor, images, ctx.cfg.watermark.n_sets, rng)
    verdict = ownership_ttest(rates, ctx.cfg.watermark.baseline, min_samples=ctx.cfg.watermark.n_sets)
    ctx.add("watermark_success_rate", verdict.success_rate, task=name)
    ctx.add_verdict(verdict_json("watermark_ownership", verdict.ttest, verdict.claim, model=name,
                                 success_rate=verdict.success_rate, adapter_used=False))
    return verdict


# -- scenarios ------------------------------------------------------------------------


def _scenario_train_victim(ctx):
    victim = _victim(ctx)
    data = _data(ctx)
    probe = train_probe(victim.encoder, data["train"], epochs=ctx.cfg.victim.probe_epochs, seed=ctx.seeds["probe"])
    ctx.add("victim_probe_acc", top1(probe, victim.encoder, data["test"]))
    history = victim.loss_history
    if history:
        ctx.add("info_nce_first_epoch", history[0]["info_nce"])
        ctx.add("info_nce_final_epoch", history[-1]["info_nce"])
    if victim.aug_predictor is not None:
        ctx.add("watermark_acc", watermark_accuracy(victim.aug_predictor, victim.encoder, data["test"].images, ctx.seeds["watermark"]))


def _scenario_linear_eval(ctx):
    victim = _victim(ctx)
    data = _data(ctx)
    epochs, seed = ctx.cfg.victim.probe_epochs, ctx.seeds["probe"]
    random_encoder = build_mlp(ctx.cfg.victim.architecture().encoder_sizes(victim.input_dim), np.random.default_rng(seed))
    for name, encoder in (("victim", victim.encoder), ("random_init", random_encoder), ("raw_pixels", None)):
        probe = train_probe(encoder, data["train"], epochs=epochs, seed=seed)
        ctx.add("probe_train_acc", top1(probe, encoder, data["train"]), task=name)
        ctx.add("probe_test_acc", top1(probe, encoder, data["test"]), task=name)


def _legit_probe_acc(ctx, api):
    data = _data(ctx)
    train = api.query("legitimate_user", data["train"].X)
    test = api.query("legitimate_user", data["test"].X)
    probe = LinearProbe(None, epochs=ctx.cfg.victim.probe_epochs, n_classes=data["train"].n_classes,
                        random_state=ctx.seeds["probe"])
    return probe.fit(train, data["train"].labels).score(test, data["test"].labels)


def _scenario_steal(ctx):
    victim = _victim(ctx)
    stolen, api = _steal(ctx, victim)
    save_checkpoint(stolen.encoder, ctx.checkpoint_dir / "stolen_encoder.ckpt")
    report = evaluate_stolen(stolen, victim, _downstream(ctx), ctx.cfg.victim.probe_epochs, ctx.seeds["probe"])
    meta = _steal_meta(ctx)
    for row in report.rows:
        for metric in ("stolen_probe_acc", "victim_probe_acc", "rep_distance"):
            ctx.add(metric, row[metric], task=row["task"], **meta)
    ctx.add("queries_spent", stolen.queries_spent, **meta)
    if ctx.cfg.serve.defenses and ctx.cfg.serve.expose == "representations_y":
        ctx.add("legit_probe_acc", _legit_probe_acc(ctx, api), **meta)
    if any(d.kind == "similarity_perturb" for d in ctx.cfg.serve.defenses):
        ctx.add("attacker_flags", api.flag_count("attacker"), **meta)
    api.log.save(ctx.out_dir / "query_log.tsv")


def _scenario_detect_calibrate(ctx):
    victim = _victim(ctx)
    d = ctx.cfg.detect
    rng = np.random.default_rng(ctx.seeds["detect"])
    paired, distinct = make_eval_pairs(_data(ctx)["test"].images, d.policy.build(), rng, d.n_pairs)
    table = io.StringIO()
    writer = csv.writer(table, lineterminator="\n")
    writer.writerow(["space", "metric", "threshold", "fpr", "fnr"])
    for space in ("projection_z", "representation_y"):
        for metric in d.metrics:
            same = pair_scores(victim, paired, space, metric)
            diff = pair_scores(victim, distinct, space, metric)
            rows = threshold_sweep(same, diff, metric, space)
            for tau, fpr, fnr in rows:
                writer.writerow([space, metric, repr(tau), repr(fpr), repr(fnr)])
            tau, fpr, fnr = min(rows, key=lambda r: (r[1] + r[2], r[1]))
            task = f"{space}/{metric}"
            ctx.add("best_threshold", tau, task=task)
            ctx.add("best_fpr", fpr, task=task)
            ctx.add("best_fnr", fnr, task=task)
            try:
                cal, rates = calibrate_threshold(same, diff, metric, space, d.max_fpr)
            except ParameterError:
                continue
            ctx.add("calibrated_threshold", cal.threshold, task=task)
            ctx.add("calibrated_fnr", rates.fnr, task=task)
    (ctx.out_dir / "thresholds.csv").write_text(table.getvalue())


def _scenario_watermark_verify(ctx):
    victim = _victim(ctx, watermark=True)
    stolen, _ = _steal(ctx, victim)
    if ctx.cfg.scenario != "full_pipeline":
        ctx.add("queries_spent", stolen.queries_spent, **_steal_meta(ctx))
    _watermark_verdict(ctx, "victim", victim.encoder, victim.aug_predictor)
    _watermark_verdict(ctx, "stolen", stolen.encoder, victim.aug_predictor)
    _watermark_verdict(ctx, "independent", _independent(ctx).encoder, victim.aug_predictor)


def _scenario_dataset_inference(ctx):
    victim = _victim(ctx)
    data = _data(ctx)
    inf = ctx.cfg.inference
    train, test = data["train"], data["test"]
    n = inf.n_samples or min(len(train), len(test))
    if n > min(len(train), len(test)):
        raise ConfigError(f"at most {min(len(train), len(test))} samples are available", "inference.n_samples")
    rng = np.random.default_rng(ctx.seeds["inference"])
    private = train.images[np.sort(rng.choice(len(train), n, replace=False))]
    public = test.images[np.sort(rng.choice(len(test), n, replace=False))]
    supervised = SupervisedClassifier(
        architecture=ctx.cfg.victim.architecture(),
        policy=ctx.cfg.victim.policy.build() if inf.supervised_augment else None,
        optimizer=ctx.cfg.victim.optimizer.build(),
        epochs=inf.supervised_epochs,
        batch_size=ctx.cfg.victim.batch_size,
        random_state=ctx.seeds["independent"],
    ).fit(train.images, train.labels)
    ctx.add("supervised_test_acc", supervised.score(test.X, test.labels))
    policy = inf.policy.build()
    for name, model in (("supervised", supervised), ("ssl_victim", victim)):
        scores = di_scores(model, private, public, inf.n_aug, policy, np.random.default_rng(ctx.seeds["inference"]))
        result, claim = di_test(scores)
        ctx.add("di_t", result.t, task=name)
        ctx.add("di_delta_mu", result.delta_mu, task=name)
        ctx.add_verdict(verdict_json("dataset_inference", result, claim, model=name))
    stolen, _ = _steal(ctx, victim)
    meta = _steal_meta(ctx)
    ctx.add("rep_distance", rep_distance(victim.encoder, stolen.encoder, test.images), task="stolen", **meta)
    ctx.add("rep_distance", rep_distance(victim.encoder, _independent(ctx).encoder, test.images), task="independent")


def poison_instance(p, seed):
    """Toy poisoning setup: surrogate attacker ``F``, downstream ``G``, query ``x``, served ``y_v``.

    ``y_v`` is ``F(x)`` plus Gaussian noise, standing in for the gap between
    the victim and the attacker's surrogate; without it the attacker's
    gradient would vanish.
    """
    rng = np.random.default_rng(seed)
    F = build_mlp([p.input_dim, p.hidden, p.rep_dim], rng)
    G = build_mlp([p.rep_dim, p.n_classes], rng)
    x = rng.normal(size=p.input_dim)
    y_v = F(x[None])[0] + 0.5 * rng.normal(size=p.rep_dim)
    return F, G, x, y_v


def _scenario_poison_demo(ctx):
    p = ctx.cfg.poison
    if p.target >= p.n_classes:
        raise ConfigError(f"target must be < n_classes ({p.n_classes})", "poison.target")
    F, G, x, y_v = poison_instance(p, ctx.seeds["poison"])
    result = poison(y_v, x, PoisonConfig(F, G, p.target, p.epsilon, p.beta, p.steps, seed=ctx.seeds["poison"]))
    ctx.add("sim_ab", result.sim_ab)
    ctx.add("sim_cd", result.sim_cd)
    ctx.add("perturbation_norm", np.linalg.norm(result.y_tilde - y_v))
    grad_gap = np.max(np.abs(attacker_grad(F, x, y_v) - attacker_grad(F, x, y_v, "autodiff")))
    legit_gap = np.max(np.abs(legit_grad(G, y_v, p.target) - legit_grad(G, y_v, p.target, "autodiff")))
    ctx.add("attacker_grad_max_abs_diff", grad_gap)
    ctx.add("legit_grad_max_abs_diff", legit_gap)


def _scenario_pow_demo(ctx):
    p = ctx.cfg.pow
    policy = DifficultyPolicy(p.base_bits, p.increment_bits_per_flag, p.cap_bits)
    issuer = PuzzleIssuer(secret=str(ctx.seeds["pow"]).encode())
    for flags in range(0, 4):
        ctx.add("policy_difficulty", policy.difficulty(flags), task=f"flags={flags}")
    for bits in p.difficulties:
        attempts = []
        for _ in range(p.trials):
            puzzle = issuer.make_puzzle("demo", DifficultyPolicy(bits, 0, bits))
            suffix = solve(puzzle)
            if not verify(puzzle, suffix):
                raise NumericError(f"solver returned an invalid suffix at difficulty {bits}")
            attempts.append(attempts_used(suffix))
        ctx.add("mean_attempts", np.mean(attempts), task=f"difficulty={bits}")
        ctx.add("attempts_ratio", np.mean(attempts) / 2.0**bits, task=f"difficulty={bits}")


def _scenario_full_pipeline(ctx):
    for stage in (
        _scenario_train_victim,
        _scenario_steal,
        _scenario_detect_calibrate,
        _scenario_watermark_verify,
        _scenario_dataset_inference,
    ):
        stage(ctx)


SCENARIO_FUNCS = {
    "train_victim": _scenario_train_victim,
    "steal": _scenario_steal,
    "linear_eval": _scenario_linear_eval,
    "detect_calibrate": _scenario_detect_calibrate,
    "watermark_verify": _scenario_watermark_verify,
    "dataset_inference": _scenario_dataset_inference,
    "poison_demo": _scenario_poison_demo,
    "pow_demo": _scenario_pow_demo,
    "full_pipeline": _scenario_full_pipeline,
}


# -- running --------------------------------------------------------------------------


def check_references(cfg: ExperimentConfig):
    ckpt = cfg.victim.checkpoint
    if ckpt is None:
        return
    if cfg.scenario in ("train_victim", "full_pipeline"):
        raise ConfigError(f"{cfg.scenario} trains its own victim; remove the checkpoint", "victim.checkpoint")
    if not (Path(ckpt) / "encoder.ckpt").is_file():
        raise CheckpointMissing(f"no victim checkpoint at {ckpt}", "victim.checkpoint")


def output_dir(cfg: ExperimentConfig):
    return Path(cfg.out) / f"{cfg.scenario}-{cfg.config_hash()}"


def _cells(row: ResultRow):
    return [repr(v) if isinstance(v, float) else v for v in row.as_dict().values()]


def write_rows(path, rows):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(FIELDS)
        writer.writerows(_cells(row) for row in rows)


def run_config(cfg: ExperimentConfig) -> RunResult:
    """Execute one scenario and write its artifacts."""
    check_references(cfg)
    out_dir = output_dir(cfg)
    if out_dir.exists():
        shutil.rmtree(out_dir)
    out_dir.mkdir(parents=True)
    ctx = _Context(cfg, out_dir)
    start = time.perf_counter()
    try:
        SCENARIO_FUNCS[cfg.scenario](ctx)
    except NumericError as exc:
        raise NumericError(f"scenario {cfg.scenario}: {exc.reason}", step=exc.step, seed=exc.seed) from exc
    write_rows(out_dir / "results.csv", ctx.rows)
    (out_dir / "verdicts.json").write_text(json.dumps(ctx.verdicts, indent=2, sort_keys=True) + "\n")
    (out_dir / "config.yaml").write_text(cfg.to_yaml())
    return RunResult(out_dir, ctx.rows, ctx.verdicts, time.perf_counter() - start)


def _overrides(data, seed=None, out=None):
    if seed is not None:
        data = set_path(data, "seed", int(seed))
    if out is not None:
        data = set_path(data, "out", str(out))
    return data


def run(config_path, seed=None, out=None) -> RunResult:
    return run_config(parse_config(_overrides(read_config_data(config_path), seed, out)))


def _sweep_one(args):
    data, axis, value = args
    cfg = parse_config(set_path(data, axis, value))
    return value, run_config(cfg)


def sweep(config_path, axis, values, seed=None, out=None, jobs=1):
    """One run per value of the numeric field ``axis``; rows are merged into one CSV.

    Returns ``(merged_csv_path, [RunResult, ...])``.
    """
    data = _overrides(read_config_data(config_path), seed, out)
    base = parse_config(data)
    if not values:
        raise ConfigError("sweep needs at least one value", "--values")
    kind = numeric_field(base, axis)
    try:
        typed = [kind(v) if kind is float else _as_int(v) for v in values]
    except ValueError:
        raise ConfigError(f"values must be {kind.__name__}s, got {list(values)}", axis) from None
    for v in typed:
        check_references(parse_config(set_path(data, axis, v)))
    tasks = [(data, axis, v) for v in typed]
    if jobs > 1:
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_sweep_one, tasks))
    else:
        results = [_sweep_one(t) for t in tasks]
    sweep_dir = Path(base.out) / f"sweep-{base.scenario}-{axis}-{base.config_hash()}"
    sweep_dir.mkdir(parents=True, exist_ok=True)
    merged = sweep_dir / "results.csv"
    with open(merged, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["axis", "axis_value", *FIELDS])
        for value, result in results:
            for row in result.rows:
                writer.writerow([axis, repr(value), *_cells(row)])
    return merged, [r for _, r in results]


def _as_int(v):
    f = float(v)
    if not f.is_integer():
        raise ValueError(v)
    return int(f)


__all__ = ["run", "run_config", "sweep", "load_config", "ResultRow", "RunResult", "FIELDS", "poison_instance"]

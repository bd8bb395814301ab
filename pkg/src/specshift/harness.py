"""Declarative experiment suites and machine-readable reports.

Each suite consumes an :class:`ExperimentConfig`, runs a seeded,
deterministic experiment, and emits a :class:`RunReport` whose rows are
either plain metrics or pass/fail assertions.  Reports serialize to CSV
or JSONL with identical values; the elapsed-time row is the only field
allowed to differ between reruns.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field, fields

import numpy as np

from .distributions import Categorical, chi_square_gof, two_sample_chi_square
from .errors import ConfigInvalid
from .models import (
    ModelQuartet,
    build_shifted_model,
    gen_random_model,
    gen_random_reward,
    make_quartet,
    rlhf_optimal,
    sequence_distribution,
    worked_example_quartet,
)
from .oracle import (
    _run_kernel,
    acceptance_table,
    best_of_n,
    counters_dict,
    distortion_report,
    distortion_scan,
    empirical_tv,
    monte_carlo_law,
    rejection_baseline,
    sss_sequence_law,
    ss_sequence_law,
    step_table_sss,
    tokens_to_rewards,
)
from .rng import RngStream
from .sampling import LookaheadConfig

SUITES = ("verify", "simulate", "acceptance", "gamma-sweep", "baselines",
          "distortion")

#: vocab=0 / instances=0 mean "suite default" (documented per suite).
AUTO = 0


@dataclass(frozen=True)
class ExperimentConfig:
    suite: str = ""
    vocab: int = AUTO
    depth: int = 3
    lookahead: int = 2
    gamma: float = 1.0
    beta: float = 0.5
    reward_scale: float = 1.0
    mix: float = 0.5
    runs: int = 200_000
    instances: int = AUTO
    seed: int = 42
    out: str = ""
    format: str = "csv"

    def resolved_vocab(self) -> int:
        if self.vocab != AUTO:
            return self.vocab
        return 16 if self.suite == "acceptance" else 4

    def resolved_instances(self) -> int:
        if self.instances != AUTO:
            return self.instances
        return {"verify": 1000, "acceptance": 200, "distortion": 500}.get(
            self.suite, 100
        )


_INT_KEYS = {"vocab", "depth", "lookahead", "runs", "instances", "seed"}
_FLOAT_KEYS = {"gamma", "beta", "reward_scale", "mix"}
_STR_KEYS = {"suite", "out", "format"}
KNOWN_KEYS = _INT_KEYS | _FLOAT_KEYS | _STR_KEYS


def parse_config(path: str | None = None, overrides: dict | None = None
                 ) -> ExperimentConfig:
    """Flat key=value file plus flag overrides, validated.

    Flags take precedence over file values.  Unknown keys and
    out-of-range values raise :class:`ConfigInvalid` naming the key.
    """
    values: dict = {}
    if path is not None:
        try:
            with open(path) as fh:
                lines = fh.readlines()
        except OSError as exc:
            raise ConfigInvalid(f"cannot read config file: {exc}") from exc
        for lineno, line in enumerate(lines, 1):
            stripped = line.strip()
            if not stripped or stripped.startswith("#"):
                continue
            if "=" not in stripped:
                raise ConfigInvalid(f"line {lineno}: expected key = value")
            key, _, raw = stripped.partition("=")
            values[key.strip()] = raw.strip()
    for key, val in (overrides or {}).items():
        if val is not None:
            values[key] = val
    for key in values:
        if key not in KNOWN_KEYS:
            raise ConfigInvalid(f"unknown key: {key}")
    cast: dict = {}
    for key, raw in values.items():
        try:
            if key in _INT_KEYS:
                cast[key] = int(raw)
            elif key in _FLOAT_KEYS:
                cast[key] = float(raw)
            else:
                cast[key] = str(raw)
        except (TypeError, ValueError):
            raise ConfigInvalid(f"bad value for key: {key}") from None
    cfg = ExperimentConfig(**cast)
    _validate(cfg)
    return cfg


def _validate(cfg: ExperimentConfig) -> None:
    if cfg.suite not in SUITES:
        raise ConfigInvalid(
            f"suite: expected one of {', '.join(SUITES)!s}, got {cfg.suite!r}"
        )
    if cfg.vocab != AUTO and not 2 <= cfg.vocab <= 64:
        raise ConfigInvalid("vocab: must be 2..64 (or 0 for suite default)")
    if not 1 <= cfg.depth <= 16:
        raise ConfigInvalid("depth: must be 1..16")
    if cfg.lookahead < 1:
        raise ConfigInvalid("lookahead: must be >= 1")
    if not 0.0 <= cfg.gamma <= 1.0:
        raise ConfigInvalid("gamma: must lie in [0, 1]")
    if cfg.beta <= 0:
        raise ConfigInvalid("beta: must be positive")
    if cfg.reward_scale < 0:
        raise ConfigInvalid("reward_scale: must be nonnegative")
    if not 0.0 <= cfg.mix <= 1.0:
        raise ConfigInvalid("mix: must lie in [0, 1]")
    if cfg.suite == "simulate" and cfg.runs < 10**4:
        raise ConfigInvalid("runs: simulate requires >= 10^4")
    if cfg.runs < 1:
        raise ConfigInvalid("runs: must be >= 1")
    if cfg.instances != AUTO and cfg.instances < 1:
        raise ConfigInvalid("instances: must be >= 1")
    if not 0 <= cfg.seed < 2**64:
        raise ConfigInvalid("seed: must fit in 64 unsigned bits")
    if cfg.format not in ("csv", "jsonl"):
        raise ConfigInvalid("format: must be csv or jsonl")


@dataclass
class ReportRow:
    kind: str  # "metric" or "assert"
    name: str
    value: float
    stderr: float | None = None
    verdict: str | None = None  # "pass" / "fail" for assert rows


@dataclass
class RunReport:
    config: ExperimentConfig
    rows: list = field(default_factory=list)
    elapsed: float = 0.0

    def metric(self, name: str, value: float, stderr: float | None = None):
        self.rows.append(ReportRow("metric", name, float(value), stderr))

    def check(self, name: str, value: float, ok: bool,
              stderr: float | None = None):
        self.rows.append(ReportRow("assert", name, float(value), stderr,
                                   "pass" if ok else "fail"))

    @property
    def passed(self) -> bool:
        return all(r.verdict != "fail" for r in self.rows)

    def _config_items(self):
        return [(f.name, getattr(self.config, f.name))
                for f in fields(self.config)]

    def to_csv_lines(self, include_timing: bool = True) -> list:
        lines = ["kind,name,value,stderr,verdict"]
        for key, val in self._config_items():
            lines.append(f"config,{key},{_fmt(val)},,")
        for r in self.rows:
            se = "" if r.stderr is None else _fmt(r.stderr)
            verdict = r.verdict or ""
            lines.append(f"{r.kind},{r.name},{_fmt(r.value)},{se},{verdict}")
        lines.append(f"verdict,overall,{'pass' if self.passed else 'fail'},,")
        if include_timing:
            lines.append(f"timing,elapsed_s,{self.elapsed:.3f},,")
        return lines

    def to_jsonl_lines(self, include_timing: bool = True) -> list:
        import json

        lines = [json.dumps({"config": dict(self._config_items())})]
        for r in self.rows:
            lines.append(json.dumps({
                "kind": r.kind, "name": r.name, "value": r.value,
                "stderr": r.stderr, "verdict": r.verdict,
            }))
        lines.append(json.dumps(
            {"kind": "verdict", "overall": "pass" if self.passed else "fail"}
        ))
        if include_timing:
            lines.append(json.dumps(
                {"kind": "timing", "elapsed_s": round(self.elapsed, 3)}
            ))
        return lines

    def write(self, path: str) -> None:
        lines = (self.to_csv_lines() if self.config.format == "csv"
                 else self.to_jsonl_lines())
        with open(path, "w") as fh:
            fh.write("\n".join(lines) + "\n")


def _fmt(val) -> str:
    if isinstance(val, float):
        return "%.17g" % val
    return str(val)


# --- verify -----------------------------------------------------------------


def verify_quartet(quartet: ModelQuartet, gamma: float = 1.0) -> dict:
    """Machine-precision checks of one quartet; returns measured gaps.

    Keys: consistency_tv, ratio_identity_err, step_tv, sequence_tv,
    proof_identity_err, reject_mass_err.
    """
    out = {k: 0.0 for k in ("consistency_tv", "ratio_identity_err",
                            "step_tv", "sequence_tv",
                            "proof_identity_err", "reject_mass_err")}
    shifted_ref = build_shifted_model(quartet.sft, quartet.reward)
    optimal_ref = rlhf_optimal(quartet.target, quartet.reward)
    for pid in quartet.prompt_ids:
        sh, opt = quartet.shifted_draft.flat(pid), quartet.optimal.flat(pid)
        sft, tgt = quartet.sft.flat(pid), quartet.target.flat(pid)
        cons = max(
            0.5 * np.abs(sh - shifted_ref.flat(pid)).sum(axis=1).max(),
            0.5 * np.abs(opt - optimal_ref.flat(pid)).sum(axis=1).max(),
        )
        out["consistency_tv"] = max(out["consistency_tv"], cons)
        # ratio identity of the per-step proof: opt/sh == tgt/sft
        mask = sft > 0
        lhs = np.where(mask & (sh > 0), opt / np.where(sh > 0, sh, 1.0), 1.0)
        rhs = np.where(mask, tgt / np.where(mask, sft, 1.0), 1.0)
        denom = np.where(np.abs(rhs) > 0, rhs, 1.0)
        ratio_err = float(np.abs(np.where(mask & (rhs > 0),
                                          lhs / denom - 1.0, 0.0)).max())
        out["ratio_identity_err"] = max(out["ratio_identity_err"], ratio_err)
        emitted, reject = step_table_sss(quartet, pid, gamma)
        step_tv = 0.5 * float(np.abs(emitted - opt).sum(axis=1).max())
        out["step_tv"] = max(out["step_tv"], step_tv)
        seq_tv = 0.5 * float(np.abs(
            sss_sequence_law(quartet, pid, gamma=gamma)
            - sequence_distribution(quartet.optimal, pid)
        ).sum())
        out["sequence_tv"] = max(out["sequence_tv"], seq_tv)
        proof = np.abs(np.minimum(sh, opt) + np.maximum(0.0, opt - sh) - opt)
        out["proof_identity_err"] = max(out["proof_identity_err"],
                                        float(proof.max()))
        clamp_sum = np.maximum(0.0, opt - sh).sum(axis=1)
        rm_err = float(np.abs(reject - clamp_sum).max())
        out["reject_mass_err"] = max(out["reject_mass_err"], rm_err)
    return out


VERIFY_TOLERANCES = {
    "consistency_tv": 1e-12,
    "ratio_identity_err": 1e-10,
    "step_tv": 1e-12,
    "sequence_tv": 1e-10,
    "proof_identity_err": 1e-12,
    "reject_mass_err": 1e-10,
}


def run_verify(cfg: ExperimentConfig) -> RunReport:
    report = RunReport(cfg)
    start = time.perf_counter()
    n_inst = cfg.resolved_instances()
    worst = {k: 0.0 for k in VERIFY_TOLERANCES}
    for i in range(n_inst):
        vocab = cfg.vocab if cfg.vocab != AUTO else 2 + (i % 15)
        stream = RngStream(cfg.seed, 1000 + i)
        quartet = make_quartet(
            vocab, cfg.depth, beta=cfg.beta, reward_scale=cfg.reward_scale,
            mix=cfg.mix, matched=True, rng=stream,
        )
        gaps = verify_quartet(quartet, cfg.gamma)
        for key, val in gaps.items():
            worst[key] = max(worst[key], val)
    report.metric("instances", n_inst)
    for key, tol in VERIFY_TOLERANCES.items():
        report.check(f"{key}_max", worst[key], worst[key] < tol)
    report.elapsed = time.perf_counter() - start
    return report


# --- simulate ---------------------------------------------------------------


def run_simulate(cfg: ExperimentConfig) -> RunReport:
    if cfg.runs < 10**4:
        raise ConfigInvalid("runs: simulate requires >= 10^4")
    report = RunReport(cfg)
    start = time.perf_counter()
    vocab = cfg.resolved_vocab()
    stream = RngStream(cfg.seed, 1)
    quartet = make_quartet(vocab, cfg.depth, beta=cfg.beta,
                           reward_scale=cfg.reward_scale, mix=cfg.mix,
                           matched=True, rng=stream)
    lcfg = LookaheadConfig(K=cfg.lookahead, max_length=cfg.depth,
                           gamma=cfg.gamma)

    exact_sss = sss_sequence_law(quartet, 0, gamma=cfg.gamma)
    freq, counts, counters = monte_carlo_law(
        "shifted", quartet, lcfg, 0, cfg.runs, RngStream(cfg.seed, 2)
    )
    tv = empirical_tv(freq, exact_sss)
    stat, pval = chi_square_gof(counts, Categorical(exact_sss), cfg.runs)
    report.check("sss_tv_to_oracle", tv, tv <= 0.01)
    report.check("sss_chi_square_p", pval, pval > 1e-3)
    report.metric("sss_acceptance_rate",
                  counters["accepted"] / counters["verified"])
    report.metric("sss_tokens_per_target_call",
                  counters["emitted"] / counters["target_calls"])
    report.metric("sss_target_calls", counters["target_calls"])

    exact_ss = ss_sequence_law(quartet.sft, quartet.target, 0)
    freq_ss, counts_ss, counters_ss = monte_carlo_law(
        "standard", (quartet.sft, quartet.target), lcfg, 0, cfg.runs,
        RngStream(cfg.seed, 3),
    )
    tv_ss = empirical_tv(freq_ss, exact_ss)
    _, pval_ss = chi_square_gof(counts_ss, Categorical(exact_ss), cfg.runs)
    report.check("ss_tv_to_target_law", tv_ss, tv_ss <= 0.01)
    report.check("ss_chi_square_p", pval_ss, pval_ss > 1e-3)
    report.metric("ss_acceptance_rate",
                  counters_ss["accepted"] / counters_ss["verified"])

    # lookahead invariance: the emitted law must not depend on K
    k_counts = {}
    for idx, k in enumerate((1, 2, 4)):
        kcfg = LookaheadConfig(K=k, max_length=cfg.depth, gamma=cfg.gamma)
        _, kc, _ = monte_carlo_law("shifted", quartet, kcfg, 0, cfg.runs,
                                   RngStream(cfg.seed, 10 + idx))
        k_counts[k] = kc
    for a, b in ((1, 2), (1, 4), (2, 4)):
        _, p = two_sample_chi_square(k_counts[a], k_counts[b])
        report.check(f"lookahead_concordance_K{a}_K{b}", p, p > 1e-3)
    report.elapsed = time.perf_counter() - start
    return report


# --- acceptance -------------------------------------------------------------


def run_acceptance(cfg: ExperimentConfig) -> RunReport:
    report = RunReport(cfg)
    start = time.perf_counter()
    vocab = cfg.resolved_vocab()
    n_inst = cfg.resolved_instances()
    quartets = []
    tv_shift = []
    for i in range(n_inst):
        stream = RngStream(cfg.seed, 2000 + i)
        q = make_quartet(vocab, cfg.depth, beta=cfg.beta,
                         reward_scale=cfg.reward_scale, mix=cfg.mix,
                         matched=True, rng=stream)
        quartets.append(q)
        tv_shift.append(0.5 * np.abs(
            q.sft.flat(0) - q.shifted_draft.flat(0)
        ).sum(axis=1).mean())
    mean_shift = float(np.mean(tv_shift))
    report.check("mean_tv_sft_to_shifted", mean_shift,
                 mean_shift >= 0.2 or cfg.reward_scale == 0.0)

    n_blocks = min(cfg.runs, 10**4)
    grid = {}
    for rule in ("standard", "shifted"):
        for draft in ("sft", "shifted_draft"):
            base = {"standard": 0, "shifted": 200_000}[rule] \
                + {"sft": 0, "shifted_draft": 100_000}[draft]
            mean, se, _ = acceptance_table(
                quartets, rule, draft, n_blocks,
                RngStream(cfg.seed, 500_000 + base), K=cfg.lookahead,
            )
            grid[(rule, draft)] = (mean, se)
            report.metric(f"rate_{rule}_rule_{draft}_draft", mean, se)
    m_plain, se_plain = grid[("standard", "sft")]
    m_drop, se_drop = grid[("standard", "shifted_draft")]
    sep_se = float(np.hypot(se_plain, se_drop))
    if cfg.reward_scale == 0.0:
        gap = abs(m_plain - m_drop)
        report.check("rates_equal_at_zero_shift", gap,
                     gap <= 3.0 * sep_se + 1e-12)
    else:
        sigma = (m_plain - m_drop) / sep_se if sep_se > 0 else float("inf")
        report.check("acceptance_drop_sigma", sigma, sigma >= 3.0)

    # single-instance worked example: analytic rates 0.7 and 0.679
    wq = worked_example_quartet()
    n_single = 10**5
    for draft, analytic in (("sft", 0.7), ("shifted_draft", 5 / 19 + 6 / 19 + 0.1)):
        proposal = wq.sft if draft == "sft" else wq.shifted_draft
        _, counters = _run_kernel(
            "standard", (proposal, wq.target),
            LookaheadConfig(K=1, max_length=1), 0, n_single,
            RngStream(cfg.seed, 900_000 + (0 if draft == "sft" else 1)),
        )
        cd = counters_dict(counters)
        emp = cd["accepted"] / cd["verified"]
        se = float(np.sqrt(analytic * (1 - analytic) / cd["verified"]))
        report.check(f"worked_rate_{draft}", emp,
                     abs(emp - analytic) <= 3.0 * se, se)
    report.elapsed = time.perf_counter() - start
    return report


# --- gamma sweep ------------------------------------------------------------


def run_gamma_sweep(cfg: ExperimentConfig) -> RunReport:
    report = RunReport(cfg)
    start = time.perf_counter()
    vocab = cfg.resolved_vocab()
    matched_q = make_quartet(vocab, cfg.depth, beta=cfg.beta,
                             reward_scale=cfg.reward_scale, mix=cfg.mix,
                             matched=True, rng=RngStream(cfg.seed, 1))
    unmatched_q = make_quartet(vocab, cfg.depth, beta=cfg.beta,
                               reward_scale=cfg.reward_scale, mix=cfg.mix,
                               matched=False, rng=RngStream(cfg.seed, 2))
    grid = [round(0.1 * i, 1) for i in range(11)]
    for g in grid:
        rep_m = distortion_report(matched_q, 0, gamma=g)
        rep_u = distortion_report(unmatched_q, 0, gamma=g)
        report.metric(f"matched_tv_gamma_{g}", rep_m.tv_to_optimal)
        report.metric(f"matched_reward_gap_gamma_{g}",
                      rep_m.expected_reward_gap)
        report.metric(f"matched_kl_gamma_{g}", rep_m.kl_to_target)
        report.metric(f"unmatched_tv_gamma_{g}", rep_u.tv_to_optimal)
        report.metric(f"unmatched_reward_gap_gamma_{g}",
                      rep_u.expected_reward_gap)
        report.metric(f"unmatched_kl_gamma_{g}", rep_u.kl_to_target)
    tv_at_one = distortion_report(matched_q, 0, gamma=1.0).tv_to_optimal
    report.check("matched_tv_at_gamma_1", tv_at_one, tv_at_one < 1e-12)
    report.elapsed = time.perf_counter() - start
    return report


# --- baselines --------------------------------------------------------------


def run_baselines(cfg: ExperimentConfig) -> RunReport:
    report = RunReport(cfg)
    start = time.perf_counter()
    vocab = cfg.resolved_vocab()
    quartet = make_quartet(vocab, cfg.depth, beta=cfg.beta,
                           reward_scale=cfg.reward_scale, mix=cfg.mix,
                           matched=True, rng=RngStream(cfg.seed, 1))
    lcfg = LookaheadConfig(K=cfg.lookahead, max_length=cfg.depth,
                           gamma=cfg.gamma)
    n = min(cfg.runs, 10**4)

    tok_v, cnt_v = _run_kernel("vanilla", quartet.target, lcfg, 0, n,
                               RngStream(cfg.seed, 2))
    rew_v = tokens_to_rewards(tok_v, quartet.reward, 0)
    report.metric("vanilla_reward", rew_v.mean(),
                  rew_v.std(ddof=1) / np.sqrt(n))
    report.metric("vanilla_calls_per_seq", cnt_v[0] / n)

    tok_s, cnt_s = _run_kernel("shifted", quartet, lcfg, 0, n,
                               RngStream(cfg.seed, 3))
    rew_s = tokens_to_rewards(tok_s, quartet.reward, 0)
    cd = counters_dict(cnt_s)
    report.metric("sss_reward", rew_s.mean(), rew_s.std(ddof=1) / np.sqrt(n))
    report.metric("sss_calls_per_seq", cd["target_calls"] / n)
    acc_rate = cd["accepted"] / cd["verified"]
    tpc = cd["emitted"] / cd["target_calls"]
    report.metric("sss_acceptance_rate", acc_rate)
    report.check("sss_tokens_per_target_call", tpc,
                 tpc > 1.0 or acc_rate == 0.0)
    report.check("sss_fewer_calls_than_vanilla",
                 cd["target_calls"] / cnt_v[0],
                 cd["target_calls"] < cnt_v[0] or acc_rate == 0.0)
    se_gap = float(np.hypot(rew_s.std(ddof=1), rew_v.std(ddof=1)) / np.sqrt(n))
    report.check("sss_reward_gain_sigma",
                 (rew_s.mean() - rew_v.mean()) / se_gap,
                 rew_s.mean() - rew_v.mean() >= 2.0 * se_gap)

    tok_std, cnt_std = _run_kernel(
        "standard", (quartet.sft, quartet.target), lcfg, 0, n,
        RngStream(cfg.seed, 4),
    )
    rew_std = tokens_to_rewards(tok_std, quartet.reward, 0)
    report.metric("ss_reward", rew_std.mean(),
                  rew_std.std(ddof=1) / np.sqrt(n))
    report.metric("ss_calls_per_seq", counters_dict(cnt_std)["target_calls"] / n)

    # best-of-N call accounting at a long sequence length
    N, L_long = 10, 128
    _, bon_counters = best_of_n(quartet.target, quartet.reward, N, L_long, 0,
                                RngStream(cfg.seed, 5))
    report.check("bon_calls", bon_counters["target_calls"],
                 bon_counters["target_calls"] == N * L_long)
    bon_rewards = []
    for i in range(1000):
        _, c = best_of_n(quartet.target, quartet.reward, N, cfg.depth, 0,
                         RngStream(cfg.seed, 6000 + i))
        bon_rewards.append(c["best_reward"])
    report.metric("bon_reward", float(np.mean(bon_rewards)),
                  float(np.std(bon_rewards, ddof=1) / np.sqrt(len(bon_rewards))))

    threshold = float(np.quantile(rew_v, 0.8))
    rej_rewards = []
    rej_calls = []
    for i in range(1000):
        _, c = rejection_baseline(quartet.target, quartet.reward, threshold,
                                  8, cfg.depth, 0,
                                  RngStream(cfg.seed, 7000 + i))
        rej_rewards.append(c["best_reward"])
        rej_calls.append(c["target_calls"])
    report.metric("rejection_reward", float(np.mean(rej_rewards)),
                  float(np.std(rej_rewards, ddof=1) / np.sqrt(len(rej_rewards))))
    report.metric("rejection_calls_per_seq", float(np.mean(rej_calls)))
    report.elapsed = time.perf_counter() - start
    return report


# --- distortion -------------------------------------------------------------


def run_distortion(cfg: ExperimentConfig) -> RunReport:
    report = RunReport(cfg)
    start = time.perf_counter()
    vocab = cfg.resolved_vocab()
    n_inst = cfg.resolved_instances()
    mismatches, tvs = [], []
    for i in range(n_inst):
        stream = RngStream(cfg.seed, 3000 + i)
        sft = gen_random_model(vocab, cfg.depth, 1.0, stream)
        reward = gen_random_reward(vocab, cfg.depth, cfg.reward_scale,
                                   cfg.beta, stream)
        mix = float(stream.generator.random())
        rep = distortion_scan(sft, reward, [mix], stream)[0]
        mismatches.append(rep.mismatch)
        tvs.append(rep.tv_to_optimal)
    corr = float(np.corrcoef(np.abs(mismatches), tvs)[0, 1])
    report.metric("instances", n_inst)
    report.check("mismatch_tv_correlation", corr, corr > 0.0)

    # matched control: zero mismatch must give zero distortion
    stream = RngStream(cfg.seed, 1)
    sft = gen_random_model(vocab, cfg.depth, 1.0, stream)
    reward = gen_random_reward(vocab, cfg.depth, cfg.reward_scale, cfg.beta,
                               stream)
    rep0 = distortion_scan(sft, reward, [0.0], stream)[0]
    report.check("matched_mismatch", rep0.mismatch, rep0.mismatch < 1e-12)
    report.check("matched_tv", rep0.tv_to_optimal, rep0.tv_to_optimal < 1e-12)
    report.elapsed = time.perf_counter() - start
    return report


RUNNERS = {
    "verify": run_verify,
    "simulate": run_simulate,
    "acceptance": run_acceptance,
    "gamma-sweep": run_gamma_sweep,
    "baselines": run_baselines,
    "distortion": run_distortion,
}


def run_suite(cfg: ExperimentConfig) -> RunReport:
    return RUNNERS[cfg.suite](cfg)

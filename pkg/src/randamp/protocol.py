"""Randomness-amplification protocol: run loop, theoretical bounds, bias audit.

Steps per device j: draw four source bits per use until n_j uses carry a
Bell-coefficient setting, then spend log2(n_j) more bits to pick one of the
kept uses.  The k picked (setting, outcome) pairs feed the estimation test
Z_k <= (1/2-eps)^4 (delta/2)(1-mu); on acceptance the output is the XOR of
the per-device majorities of the first three outcome bits.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .boxes import (
    BELL_FUNCTIONAL,
    INEQUALITY_INDICES,
    NsBox,
    bell_value,
    in_inequality,
    majority,
    pack_bits,
    unpack_bits,
)
from .devices import DeviceError, IidDevice, TimeOrderedDevice, sample_outcome
from .sv import (
    SvTranscript,
    draw_index,
    draw_setting,
    exact_bitstring_distribution,
)

WILSON_Z99 = 2.5758293035489004


@dataclass(frozen=True)
class ProtocolParams:
    """All knobs of one protocol run.

    n is the per-device count of kept uses to accumulate; the selection step
    only addresses the largest power of two that fits, surplus kept uses are
    dead weight at the tail.
    """

    epsilon: float
    delta: float
    mu: float
    k: int
    n: tuple = (1,)
    t: float = 1e6
    seed: int | None = None

    def __post_init__(self):
        if not 0.0 <= self.epsilon < 0.5:
            raise ValueError(f"epsilon {self.epsilon} outside [0, 1/2)")
        if not 0.0 < self.delta <= 8.0:
            raise ValueError(f"delta {self.delta} outside (0, 8]")
        if not 0.0 < self.mu < 1.0:
            raise ValueError(f"mu {self.mu} outside (0, 1)")
        if self.k < 1:
            raise ValueError("k must be at least 1")
        n = self.n
        if isinstance(n, int):
            n = (n,) * self.k
        else:
            n = tuple(int(v) for v in n)
            if len(n) == 1:
                n = n * self.k
        if len(n) != self.k or any(v < 1 for v in n):
            raise ValueError("n must give a positive count for each of the k devices")
        object.__setattr__(self, "n", n)
        if self.t <= 0:
            raise ValueError("t must be positive")
        thr = acceptance_threshold(self)
        if not 0.0 < thr < 1.0:
            raise ValueError(f"acceptance threshold {thr} outside (0, 1)")

    def selection_sizes(self) -> tuple:
        return tuple(1 << (v.bit_length() - 1) for v in self.n)


def acceptance_threshold(params: ProtocolParams) -> float:
    e = params.epsilon
    return (0.5 - e) ** 4 * (params.delta / 2.0) * (1.0 - params.mu)


def xor_bias_bound(eps_list) -> float:
    """Bias of an XOR of independent bits with per-bit biases eps_i."""
    eps = [float(e) for e in eps_list]
    if any(not 0.0 <= e <= 0.5 for e in eps):
        raise ValueError("per-bit biases must lie in [0, 1/2]")
    prod = math.prod(eps)
    return min(0.5, 2.0 ** (len(eps) - 1) * prod)


def xor_distribution_exact(biases, signs=None) -> float:
    """P(XOR = 0) by exhaustive enumeration; bit i is 0 w.p. 1/2 + s_i b_i."""
    b = [float(v) for v in biases]
    s = [1.0] * len(b) if signs is None else [float(v) for v in signs]
    if len(s) != len(b):
        raise ValueError("one sign per bias")
    p0 = 0.0
    for code in range(1 << len(b)):
        p = 1.0
        parity = 0
        for i, (bi, si) in enumerate(zip(b, s)):
            bit = (code >> i) & 1
            p *= 0.5 + si * bi if bit == 0 else 0.5 - si * bi
            parity ^= bit
        if parity == 0:
            p0 += p
    return p0


def azuma_rejection_bound(params: ProtocolParams) -> float:
    """Lower bound on rejection probability for devices that are not good."""
    e, d, m = params.epsilon, params.delta, params.mu
    return 1.0 - math.exp(-params.k * (0.5 - e) ** 8 * (1.0 - m) ** 2 * d * d / 8.0)


def f_epsilon(epsilon: float) -> float:
    """Largest source probability of any four-setting set, relative scale."""
    lo, hi = 0.5 - epsilon, 0.5 + epsilon
    return hi**4 + lo**4 + 4.0 * lo**3 * hi + 2.0 * lo * lo * hi * hi


def robustness_threshold(epsilon: float, mu: float, delta: float) -> float:
    """Largest honest-device Bell value that still passes the test whp."""
    lo, hi = 0.5 - epsilon, 0.5 + epsilon
    return (1.0 - mu) * delta * lo**4 * f_epsilon(epsilon) / (4.0 * hi**4)


def robustness_acceptance_bound(params: ProtocolParams) -> float:
    e, d, m = params.epsilon, params.delta, params.mu
    return 1.0 - math.exp(-params.k * (0.5 - e) ** 8 * (1.0 - m) ** 2 * d * d / 2048.0)


@dataclass(frozen=True)
class PropositionBound:
    """Composable distance bound and its three contributions."""

    estimation_term: float
    azuma_term: float
    definetti_term: float

    @property
    def total(self) -> float:
        return self.estimation_term + self.azuma_term + self.definetti_term


def proposition_bound(params: ProtocolParams) -> PropositionBound:
    e, d, m, k = params.epsilon, params.delta, params.mu, params.k
    return PropositionBound(
        estimation_term=((11.0 + 7.0 * d) / 16.0) ** (m * k),
        azuma_term=2.0 * math.exp(-k * (0.5 - e) ** 8 * (1.0 - m) ** 2 * d * d / 8.0),
        definetti_term=4.0 / math.sqrt(params.t),
    )


@dataclass
class DistanceReport:
    """Distance from uniform of S given the eavesdropper (z) and setting (w).

    d takes the worst deviation over (s, w, z); d_c averages over z per s and
    maximizes over w, then sums over s.  Both carry the 1/2 prefactor, and
    d_c <= |S| d is asserted.
    """

    d: float
    d_c: float
    sigma_size: int
    conditionals: np.ndarray  # (n_w, n_z, sigma)
    z_weights: np.ndarray  # (n_w, n_z)

    def __post_init__(self):
        if self.d_c > self.sigma_size * self.d + 1e-12:
            raise AssertionError(
                f"composable distance {self.d_c} exceeds {self.sigma_size} x {self.d}"
            )
        if self.d > 0.5 + 1e-12:
            raise AssertionError(f"distance {self.d} above 1/2")


def distance_d(conditionals, z_weights=None) -> DistanceReport:
    """conditionals[w, z] is a distribution of S; z_weights[w] weights z."""
    p = np.asarray(conditionals, dtype=float)
    if p.ndim == 1:
        p = p.reshape(1, 1, -1)
    elif p.ndim == 2:
        p = p.reshape(1, *p.shape)
    n_w, n_z, sigma = p.shape
    if np.max(np.abs(p.sum(axis=2) - 1.0)) > 1e-9 or np.min(p) < -1e-12:
        raise ValueError("each conditional must be a distribution")
    if z_weights is None:
        w = np.full((n_w, n_z), 1.0 / n_z)
    else:
        w = np.asarray(z_weights, dtype=float).reshape(n_w, n_z)
        if np.max(np.abs(w.sum(axis=1) - 1.0)) > 1e-9 or np.min(w) < 0:
            raise ValueError("z_weights rows must be distributions")
    dev = np.abs(p - 1.0 / sigma)
    d = 0.5 * float(np.max(dev))
    d_c = 0.5 * float(np.sum(np.max(np.einsum("wz,wzs->ws", w, dev), axis=0)))
    return DistanceReport(d=d, d_c=d_c, sigma_size=sigma, conditionals=p, z_weights=w)


@dataclass
class EstimationRecord:
    """Per-device test data plus the oracle-side supermartingale."""

    b_values: tuple  # Bell coefficient of each selected pair, in {0,1}
    zeta: tuple  # (1/2-eps)^4 x Bell value of the true conditional box
    x_values: tuple  # running sums of (zeta_l - B_l)

    def __post_init__(self):
        prev = 0.0
        for x in self.x_values:
            if abs(x - prev) > 1.0 + 1e-12:
                raise AssertionError(f"supermartingale increment {x - prev} exceeds 1")
            prev = x


@dataclass
class RunTranscript:
    params: ProtocolParams
    uses: list  # per device: list of (setting_idx, outcome_idx) over all draws
    kept: list  # per device: indices into uses with a Bell-coefficient setting
    selection: tuple  # per device: chosen position among the addressable kept uses
    m_realized: tuple  # per device: total settings drawn
    sv: SvTranscript

    def selected_use(self, j: int) -> int:
        return self.kept[j][self.selection[j]]

    def selected_pair(self, j: int):
        return self.uses[j][self.selected_use(j)]


@dataclass
class ProtocolResult:
    accepted: bool
    z_k: float
    output_bit: int | None
    majority_bits: tuple
    threshold: float
    theoretical_bound: float
    estimation: EstimationRecord

    def __post_init__(self):
        if self.accepted != (self.output_bit is not None):
            raise AssertionError("output bit must exist exactly when accepted")
        if not 0.0 <= self.z_k <= 1.0:
            raise AssertionError(f"Z_k {self.z_k} outside [0, 1]")


def run_protocol(params: ProtocolParams, devices, sv_strategy, rng) -> tuple:
    """One full protocol run against live devices and a source strategy."""
    if len(devices) != params.k:
        raise ValueError(f"need {params.k} devices, got {len(devices)}")
    transcript = SvTranscript(epsilon=params.epsilon, bits=[], biases=[])
    uses, kept, m_realized = [], [], []
    for j, device in enumerate(devices):
        history, kept_j = [], []
        while len(kept_j) < params.n[j]:
            u_bits = draw_setting(sv_strategy, transcript, rng)
            u = pack_bits(u_bits)
            x = sample_outcome(device, history, u, rng)
            if in_inequality(u_bits):
                kept_j.append(len(history))
            history.append((u, x))
        uses.append(history)
        kept.append(kept_j)
        m_realized.append(len(history))

    sizes = params.selection_sizes()
    selection = tuple(
        draw_index(sv_strategy, transcript, sizes[j], rng) for j in range(params.k)
    )
    run = RunTranscript(
        params=params,
        uses=uses,
        kept=kept,
        selection=selection,
        m_realized=tuple(m_realized),
        sv=transcript,
    )

    scale = (0.5 - params.epsilon) ** 4
    b_values, zeta, x_values = [], [], []
    x = 0.0
    for j, device in enumerate(devices):
        pos = run.selected_use(j)
        u, xout = run.uses[j][pos]
        b = float(BELL_FUNCTIONAL[xout, u])
        true_box = device.box_given(tuple(run.uses[j][:pos]))
        z = scale * bell_value(true_box, validate=False)
        x += z - b
        b_values.append(b)
        zeta.append(z)
        x_values.append(x)
    estimation = EstimationRecord(
        b_values=tuple(b_values), zeta=tuple(zeta), x_values=tuple(x_values)
    )

    z_k = float(np.mean(b_values))
    threshold = acceptance_threshold(params)
    accepted = z_k <= threshold
    maj_bits = tuple(
        majority(*unpack_bits(run.selected_pair(j)[1])[:3]) for j in range(params.k)
    )
    output = int(np.bitwise_xor.reduce(maj_bits)) if accepted else None
    result = ProtocolResult(
        accepted=accepted,
        z_k=z_k,
        output_bit=output,
        majority_bits=maj_bits,
        threshold=threshold,
        theoretical_bound=proposition_bound(params).total,
        estimation=estimation,
    )
    return result, run


@dataclass
class GoodnessReport:
    verdict: bool
    delta_values: tuple
    good_count: int
    required: float


def goodness_oracle(devices, transcript: RunTranscript,
                    delta: float | None = None, mu: float | None = None) -> GoodnessReport:
    """Simulation-side check: do >= mu k of the selected conditional boxes sit
    below delta?  Never consulted by the protocol itself."""
    params = transcript.params
    delta = params.delta if delta is None else delta
    mu = params.mu if mu is None else mu
    values = []
    for j, device in enumerate(devices):
        pos = transcript.selected_use(j)
        box = device.box_given(tuple(transcript.uses[j][:pos]))
        values.append(bell_value(box, validate=False))
    good = sum(1 for v in values if v < delta)
    return GoodnessReport(
        verdict=good >= mu * params.k,
        delta_values=tuple(values),
        good_count=good,
        required=mu * params.k,
    )


def per_draw_setting_distribution(sv_strategy, epsilon: float) -> np.ndarray:
    """Distribution of one four-bit setting draw, indexed by setting.

    Exact when the strategy's bias depends on bit position modulo the draw
    length only, which holds for every built-in strategy whose pattern length
    divides four.
    """
    flat = exact_bitstring_distribution(sv_strategy, 4, epsilon)
    dist = np.zeros(16)
    for code in range(16):
        bits = tuple((code >> (3 - i)) & 1 for i in range(4))
        dist[pack_bits(bits)] = flat[code]
    return dist


def _strategy_period(sv_strategy) -> int | None:
    """Bias pattern length for strategies whose bias is a function of bit
    position alone; None for anything not known to have that property."""
    from .sv import ConstantBias, GreedyTowardString, HonestBits, SettingSteering

    if isinstance(sv_strategy, (HonestBits, ConstantBias)):
        return 1
    if isinstance(sv_strategy, GreedyTowardString):
        return len(sv_strategy.target)
    if isinstance(sv_strategy, SettingSteering):
        return 4
    return None


def fast_path_applicable(params: ProtocolParams, devices, sv_strategy) -> bool:
    """The vectorized runner is exact when every device is i.i.d. with one
    shared box and each draw's four bits see the same position-only bias
    pattern (period dividing 4): kept settings are then i.i.d. with the
    restricted, renormalized draw law and the selection step cannot correlate
    with box contents."""
    if not devices or not all(isinstance(d, IidDevice) for d in devices):
        return False
    first = devices[0].box.table
    if not all(np.array_equal(d.box.table, first) for d in devices[1:]):
        return False
    period = _strategy_period(sv_strategy)
    return period is not None and 4 % period == 0


def run_trials_iid(params: ProtocolParams, box, sv_strategy, trials: int, rng,
                   chunk: int = 256) -> tuple:
    """Vectorized Monte Carlo over trials of i.i.d. devices sharing one box.

    Returns (accepted, output_bits) boolean/int arrays of length trials;
    output_bits is -1 where the run aborted.  Distribution-exact under the
    fast_path_applicable conditions.
    """
    table = box.table if isinstance(box, NsBox) else NsBox(box).table
    draw = per_draw_setting_distribution(sv_strategy, params.epsilon)
    kept_idx = np.array(INEQUALITY_INDICES)
    kept_p = draw[kept_idx]
    kept_p = kept_p / kept_p.sum()
    kept_cdf = np.cumsum(kept_p)
    out_cdf = np.cumsum(table[:, kept_idx], axis=0).T  # (8, 16)
    bell_at = BELL_FUNCTIONAL[:, kept_idx].T  # (8, 16)
    maj = np.array([majority(*unpack_bits(x)[:3]) for x in range(16)])
    threshold = acceptance_threshold(params)

    accepted = np.zeros(trials, dtype=bool)
    output = np.full(trials, -1, dtype=np.int8)
    k = params.k
    for lo in range(0, trials, chunk):
        hi = min(lo + chunk, trials)
        m = hi - lo
        s = np.searchsorted(kept_cdf, rng.random((m, k)), side="right")
        s = np.minimum(s, 7)
        r = rng.random((m, k))
        x = np.empty((m, k), dtype=np.int64)
        for si in range(8):
            mask = s == si
            if np.any(mask):
                x[mask] = np.minimum(
                    np.searchsorted(out_cdf[si], r[mask], side="right"), 15
                )
        z = bell_at[s, x].mean(axis=1)
        acc = z <= threshold
        bits = np.bitwise_xor.reduce(maj[x], axis=1)
        accepted[lo:hi] = acc
        output[lo:hi] = np.where(acc, bits, -1)
    return accepted, output


@dataclass
class WilsonInterval:
    successes: int
    count: int
    low: float
    high: float


def wilson_interval(successes: int, count: int, z: float = WILSON_Z99) -> WilsonInterval:
    if count <= 0:
        return WilsonInterval(successes, count, 0.0, 1.0)
    p = successes / count
    denom = 1.0 + z * z / count
    center = (p + z * z / (2 * count)) / denom
    half = z * math.sqrt(p * (1.0 - p) / count + z * z / (4.0 * count * count)) / denom
    return WilsonInterval(successes, count, max(0.0, center - half), min(1.0, center + half))


@dataclass
class EmpiricalBiasReport:
    params: ProtocolParams
    trials_per_symbol: int
    acceptance_rate: float
    per_symbol: list  # (weight, n_accepted, p0_hat, WilsonInterval)
    distances: DistanceReport | None
    d_std_error: float

    @property
    def d(self) -> float:
        return self.distances.d if self.distances else float("nan")

    @property
    def d_c(self) -> float:
        return self.distances.d_c if self.distances else float("nan")


def estimate_output_bias(params: ProtocolParams, adversary, trials: int,
                         seed: int | None = None, fast: str = "auto") -> EmpiricalBiasReport:
    """Monte Carlo audit of the output bit against an explicit adversary.

    adversary: list of (weight, device_factory, sv_strategy) triples, one per
    eavesdropper symbol z; device_factory() yields the k devices of a trial.
    Each symbol is run `trials` times (stratified), the exact weights enter
    the distance averages.  fast: "auto" dispatches the vectorized runner
    when it is distribution-exact, "never"/"always" force the choice.
    """
    if trials < 1:
        raise ValueError("need at least one trial")
    if params.k < 1:
        raise ValueError("need at least one device")
    weights = np.array([w for w, _, _ in adversary], dtype=float)
    if len(weights) == 0 or np.min(weights) < 0 or abs(weights.sum() - 1.0) > 1e-9:
        raise ValueError("adversary weights must form a distribution")

    rows, accept_total = [], 0
    master = np.random.SeedSequence(seed)
    for (weight, factory, strategy), child in zip(adversary, master.spawn(len(adversary))):
        rng = np.random.default_rng(child)
        devices = factory()
        use_fast = fast == "always" or (
            fast == "auto" and fast_path_applicable(params, devices, strategy)
        )
        if use_fast:
            accepted, output = run_trials_iid(
                params, devices[0].box, strategy, trials, rng
            )
            n_acc = int(accepted.sum())
            zeros = int(np.sum(output == 0))
        else:
            n_acc = zeros = 0
            for _ in range(trials):
                result, _ = run_protocol(params, factory(), strategy, rng)
                if result.accepted:
                    n_acc += 1
                    zeros += result.output_bit == 0
        p0 = zeros / n_acc if n_acc else float("nan")
        rows.append((weight, n_acc, p0, wilson_interval(zeros, n_acc)))
        accept_total += n_acc

    estimable = [r for r in rows if r[1] > 0]
    if not estimable:
        distances, sigma = None, float("nan")
    else:
        conds = np.array([[p0, 1.0 - p0] for _, _, p0, _ in estimable])
        w = np.array([w for w, _, _, _ in estimable])
        distances = distance_d(conds.reshape(1, -1, 2), (w / w.sum()).reshape(1, -1))
        sigma = 0.5 * max(
            math.sqrt(max(p0 * (1 - p0), 1.0 / n) / n) for _, n, p0, _ in estimable
        )
    return EmpiricalBiasReport(
        params=params,
        trials_per_symbol=trials,
        acceptance_rate=accept_total / (trials * len(adversary)),
        per_symbol=rows,
        distances=distances,
        d_std_error=sigma,
    )

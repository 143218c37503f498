"""Distance of sequential multi-device boxes from product form.

Small instances are enumerated exactly: a system of k devices, device j used
n_j times, is a dense conditional tensor over all uses.  The statistic T
measures, averaged over source-weighted inputs and realized pasts, how far the
conditional box of the selected uses is from the product of its per-device
marginals (unnormalized 1-norm, maximum 2).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .sv import exact_bitstring_distribution

MAX_TABLE_ENTRIES = 1 << 24


def mutual_information(joint: np.ndarray) -> float:
    """I(A:B) in bits for a normalized 2-D joint distribution."""
    joint = np.asarray(joint, dtype=float)
    if joint.ndim != 2:
        raise ValueError("joint must be a 2-D table")
    if np.min(joint) < -1e-12:
        raise ValueError("joint has negative entries")
    total = joint.sum()
    if abs(total - 1.0) > 1e-9:
        raise ValueError(f"joint sums to {total}, not 1")
    pa = joint.sum(axis=1, keepdims=True)
    pb = joint.sum(axis=0, keepdims=True)
    prod = pa * pb
    mask = joint > 0
    return float(np.sum(joint[mask] * np.log2(joint[mask] / prod[mask])))


def pinsker_gap(joint: np.ndarray):
    """(lhs, rhs) of ||p_AB - p_A x p_B||_1 <= sqrt(2 ln2 I(A:B))."""
    joint = np.asarray(joint, dtype=float)
    mi = mutual_information(joint)
    pa = joint.sum(axis=1, keepdims=True)
    pb = joint.sum(axis=0, keepdims=True)
    lhs = float(np.sum(np.abs(joint - pa * pb)))
    return lhs, math.sqrt(2.0 * math.log(2.0) * mi)


class JointBoxSystem:
    """Dense sequential box over k devices with per-device use counts n.

    The tensor has one output axis then one input axis per use, uses ordered
    device-major (all of device 1 first).  Construction checks normalization
    and time-ordered no-signaling: summing device j's outputs from use m on
    must erase all dependence on device j's inputs from use m on.
    """

    def __init__(self, n, num_inputs, num_outputs, tensor, tol=1e-9, validate=True):
        self.n = tuple(int(v) for v in n)
        if not self.n or any(v < 1 for v in self.n):
            raise ValueError("need at least one use per device")
        self.k = len(self.n)
        self.total_uses = sum(self.n)
        self.num_inputs = int(num_inputs)
        self.num_outputs = int(num_outputs)
        shape = (self.num_outputs,) * self.total_uses + (self.num_inputs,) * self.total_uses
        if np.prod([float(s) for s in shape]) > MAX_TABLE_ENTRIES:
            raise ValueError("system too large for exact enumeration; shrink n or alphabets")
        self.tensor = np.asarray(tensor, dtype=float).reshape(shape)
        self.offsets = tuple(int(v) for v in np.cumsum((0,) + self.n[:-1]))
        self.tol = tol
        if validate:
            self._validate()
        self.tensor.setflags(write=False)

    def use_index(self, device: int, use: int) -> int:
        """Global use index; device and use are zero-based here."""
        if not 0 <= device < self.k or not 0 <= use < self.n[device]:
            raise IndexError(f"device {device} use {use} out of range")
        return self.offsets[device] + use

    def device_uses(self, device: int):
        return list(range(self.offsets[device], self.offsets[device] + self.n[device]))

    def _validate(self):
        N = self.total_uses
        t = self.tensor
        norm = t.sum(axis=tuple(range(N)))
        if np.max(np.abs(norm - 1.0)) > self.tol:
            raise ValueError(f"normalization off by {np.max(np.abs(norm - 1.0)):.3e}")
        if np.min(t) < -self.tol:
            raise ValueError("negative probabilities")
        for j in range(self.k):
            uses = self.device_uses(j)
            for m, g in enumerate(uses):
                tail = tuple(uses[m:])
                marg = t.sum(axis=tail, keepdims=True)
                in_axis = N + g
                ref = np.take(marg, [0], axis=in_axis)
                dev = np.max(np.abs(marg - ref))
                if dev > self.tol:
                    raise ValueError(
                        f"time-ordered no-signaling violated at device {j + 1}, use {m + 1}: "
                        f"future input shifts past marginal by {dev:.3e}"
                    )
            # Other devices' joint marginal must ignore every input of device j.
            marg = t.sum(axis=tuple(uses), keepdims=True)
            for m, g in enumerate(uses):
                ref = np.take(marg, [0], axis=N + g)
                dev = np.max(np.abs(marg - ref))
                if dev > self.tol:
                    raise ValueError(
                        f"cross-device signaling from device {j + 1}, use {m + 1}: "
                        f"input shifts other devices by {dev:.3e}"
                    )


def _suffix_closed(system: JointBoxSystem, rest) -> bool:
    """Uses we marginalize must be per-device suffixes, else pinning their
    inputs is not justified by time-ordered no-signaling."""
    rest = set(rest)
    for j in range(system.k):
        uses = system.device_uses(j)
        seen_rest = False
        for g in uses:
            if g in rest:
                seen_rest = True
            elif seen_rest:
                return False
    return True


def product_gap(system: JointBoxSystem, cond, groups, nu: np.ndarray) -> float:
    """Expected 1-norm gap between a conditional joint and its group product.

    cond: global use indices whose outputs are realized and conditioned on;
    groups: disjoint lists of use indices whose joint output distribution is
    compared against the product of the per-group marginals; remaining uses
    are marginalized.  nu weights full input assignments and must be a
    normalized tensor with one axis per use.
    """
    N = system.total_uses
    cond = sorted(cond)
    flat_groups = [g for grp in groups for g in grp]
    used = cond + flat_groups
    if len(set(used)) != len(used):
        raise ValueError("cond and groups must be disjoint")
    rest = [g for g in range(N) if g not in set(used)]
    if not _suffix_closed(system, rest):
        raise ValueError("marginalized uses must be a per-device suffix")
    nu = np.asarray(nu, dtype=float).reshape((system.num_inputs,) * N)
    if abs(nu.sum() - 1.0) > 1e-9:
        raise ValueError("nu must be normalized")

    t = system.tensor
    if rest:
        t = t.sum(axis=tuple(rest), keepdims=True)
        for g in rest:
            t = np.take(t, [0], axis=N + g)
        nu = nu.sum(axis=tuple(g for g in rest), keepdims=True)

    # P(x_cond | u): sum over every group output.
    group_axes = tuple(flat_groups)
    r = t.sum(axis=group_axes, keepdims=True)
    with np.errstate(invalid="ignore", divide="ignore"):
        q = np.where(r > 0, t / np.where(r > 0, r, 1.0), 0.0)

    prod = np.ones_like(q)
    for grp in groups:
        other = tuple(g for g in flat_groups if g not in grp)
        prod = prod * q.sum(axis=other, keepdims=True)
    gap = np.abs(q - prod).sum(axis=group_axes, keepdims=True)

    # nu (N input axes) broadcasts against the trailing input axes of the
    # tensor-shaped factors; r carries P(x_cond | u).
    return float(np.sum(gap * r * nu))


def t_statistic(system: JointBoxSystem, selection, nu: np.ndarray) -> float:
    """T for one selection a (1-based per device): distance of the selected
    uses' conditional box from the product of its device marginals, averaged
    over source inputs and device pasts."""
    sel = _check_selection(system, selection)
    cond = []
    groups = []
    for j, a in enumerate(sel):
        uses = system.device_uses(j)
        cond.extend(uses[: a - 1])
        groups.append([uses[a - 1]])
    return product_gap(system, cond, groups, nu)


def t_statistic_levels(system: JointBoxSystem, selection, nu: np.ndarray):
    """(T, [T_2..T_k]) where level i compares devices below i as one block
    against device i's selected use, conditioning on pasts of devices >= i."""
    sel = _check_selection(system, selection)
    total = t_statistic(system, selection, nu)
    levels = []
    for i in range(1, system.k):
        block = []
        for j in range(i):
            block.extend(system.device_uses(j))
        cond = []
        for j in range(i, system.k):
            uses = system.device_uses(j)
            cond.extend(uses[: sel[j] - 1])
        groups = [block, [system.device_uses(i)[sel[i] - 1]]]
        levels.append(product_gap(system, cond, groups, nu))
    return total, levels


def _check_selection(system: JointBoxSystem, selection):
    sel = tuple(int(a) for a in selection)
    if len(sel) != system.k:
        raise ValueError("selection needs one entry per device")
    for j, a in enumerate(sel):
        if not 1 <= a <= system.n[j]:
            raise ValueError(f"selection {a} outside [1, {system.n[j]}] for device {j + 1}")
    return sel


def iid_system(n, box: np.ndarray, tol=1e-9) -> JointBoxSystem:
    """Every use an independent copy of a single-party box q[x, u]."""
    q = np.asarray(box, dtype=float)
    S, L = q.shape
    total = sum(int(v) for v in n)
    t = np.array(1.0)
    for _ in range(total):
        t = np.multiply.outer(t, q)
    perm = [2 * g for g in range(total)] + [2 * g + 1 for g in range(total)]
    return JointBoxSystem(n, L, S, t.transpose(perm), tol=tol)


def exchangeable_mixture(n, components, weights, tol=1e-9) -> JointBoxSystem:
    """Mixture over component single-party boxes used i.i.d. on every use."""
    weights = np.asarray(weights, dtype=float)
    if weights.ndim != 1 or len(weights) != len(components) or len(components) == 0:
        raise ValueError("need one weight per component")
    if np.min(weights) < 0 or abs(weights.sum() - 1.0) > 1e-12:
        raise ValueError("weights must be a distribution")
    tensor = None
    for w, q in zip(weights, components):
        part = w * iid_system(n, q, tol=tol).tensor
        tensor = part if tensor is None else tensor + part
    return JointBoxSystem(n, np.asarray(components[0]).shape[1], np.asarray(components[0]).shape[0], tensor, tol=tol)


def sv_input_distribution(strategy, epsilon: float, total_uses: int, num_inputs: int) -> np.ndarray:
    """Exact source distribution over full input assignments, one symbol of
    log2(num_inputs) bits per use, consumed use-major and big-endian."""
    bits = (num_inputs - 1).bit_length()
    if 2**bits != num_inputs:
        raise ValueError("input alphabet must be a power of two")
    flat = exact_bitstring_distribution(strategy, total_uses * bits, epsilon)
    return flat.reshape((num_inputs,) * total_uses)


def sv_selection_distribution(strategy, epsilon: float, n) -> dict:
    """Exact source distribution over selections; device j consumes log2 of
    the largest power of two <= n_j bits, big-endian, devices in order — the
    same truncated index draw the protocol uses, so positions beyond the
    addressable prefix carry zero weight.  Assumes a strategy whose bias
    depends on position only (asserted), since the selection bits follow the
    setting bits in a real transcript."""
    if not getattr(strategy, "position_dependent", False):
        raise ValueError("exact selection weights need a position-dependent strategy")
    widths = []
    for n_j in n:
        if n_j < 1:
            raise ValueError("use counts must be positive")
        widths.append(int(n_j).bit_length() - 1)
    total_bits = sum(widths)
    flat = exact_bitstring_distribution(strategy, total_bits, epsilon)
    out = {}
    for code in range(len(flat)):
        bits_left = total_bits
        rem = code
        sel = []
        for w in widths:
            bits_left -= w
            sel.append((rem >> bits_left) & ((1 << w) - 1))
            rem &= (1 << bits_left) - 1
        sel = tuple(a + 1 for a in sel)
        out[sel] = out.get(sel, 0.0) + float(flat[code])
    return out


def log2_block_sizes(epsilon: float, k: int, t: float, k_exponent: int = 2):
    """log2 of the recursion n_i^(1 - log2(1+2eps)) = 8 ln2 k^e t^3 n_{i-1}."""
    if not 0.0 <= epsilon < 0.5:
        raise ValueError("epsilon must lie in [0, 1/2)")
    if k < 1 or t <= 0:
        raise ValueError("need k >= 1 and t > 0")
    if k_exponent not in (2, 3):
        raise ValueError("k_exponent must be 2 or 3")
    shrink = 1.0 - math.log2(1.0 + 2.0 * epsilon)
    factor = math.log2(8.0 * math.log(2.0) * (float(k) ** k_exponent) * float(t) ** 3)
    logs = [0.0]
    for _ in range(1, k):
        logs.append((factor + logs[-1]) / shrink)
    return logs


def block_sizes(epsilon: float, k: int, t: float, k_exponent: int = 2):
    """Integer block sizes from the recursion, each level ceiled before reuse.

    Raises OverflowError when a level exceeds 2^62; use log2_block_sizes to
    inspect such schedules.
    """
    shrink = 1.0 - math.log2(1.0 + 2.0 * epsilon)
    log2_block_sizes(epsilon, k, t, k_exponent)  # argument validation
    factor = 8.0 * math.log(2.0) * (float(k) ** k_exponent) * float(t) ** 3
    sizes = [1]
    for _ in range(1, k):
        raw = (factor * sizes[-1]) ** (1.0 / shrink)
        if raw > 2.0**62:
            raise OverflowError("block size exceeds 2^62; see log2_block_sizes")
        sizes.append(math.ceil(raw - 1e-9))
    return sizes


@dataclass
class DeFinettiRhs:
    threshold: float
    probability_bound: float
    per_level_threshold: list
    presubstitution_threshold: float
    presubstitution_probability: float


def definetti_rhs(n, t, epsilon: float, sigma_size: int) -> DeFinettiRhs:
    """Threshold and failure probability for the selection-averaged T bound.

    n: per-device use counts; t: one parameter per level 2..k.  The threshold
    follows the substituted form of the concentration bound; the raw
    (pre-substitution) pair, with t in place of t^2 n^log2(1+2eps), is also
    reported.  The alphabet enters through log2(sigma_size); the four-party
    box alphabet (16 outcomes) reproduces the classic 8 ln2 prefactor.
    """
    n = [int(v) for v in n]
    t = [float(v) for v in t]
    if len(t) != len(n) - 1:
        raise ValueError("need one t per level 2..k")
    if any(v < 1 for v in n) or any(v <= 0 for v in t):
        raise ValueError("n must be >= 1 and t > 0")
    if sigma_size < 2:
        raise ValueError("sigma_size must be at least 2")
    log_sigma = math.log2(sigma_size)
    shrink = 1.0 - math.log2(1.0 + 2.0 * epsilon)
    coeff = 2.0 * math.log(2.0) * log_sigma
    per_level = []
    presub = []
    presub_prob = 0.0
    for i, t_i in enumerate(t, start=2):
        n_i = n[i - 1]
        prev = sum(n[: i - 1])
        per_level.append(math.sqrt(coeff * t_i**2 * prev / n_i**shrink))
        presub.append(math.sqrt(coeff * t_i * prev / n_i))
        presub_prob += math.sqrt(n_i ** math.log2(1.0 + 2.0 * epsilon) / t_i)
    return DeFinettiRhs(
        threshold=float(sum(per_level)),
        probability_bound=float(sum(1.0 / v for v in t)),
        per_level_threshold=per_level,
        presubstitution_threshold=float(sum(presub)),
        presubstitution_probability=float(presub_prob),
    )


@dataclass
class DeFinettiReport:
    n: tuple
    epsilon: float
    sigma_size: int
    t_levels: tuple
    threshold: float
    probability_bound: float
    selections: list = field(default_factory=list)  # (selection, weight, T, levels)
    weighted_exceed_fraction: float = 0.0
    max_t: float = 0.0
    pinsker_worst_slack: float = float("-inf")
    one_norm_convention: str = "unnormalized (max 2)"

    def to_json(self) -> dict:
        return {
            "n": list(self.n),
            "epsilon": self.epsilon,
            "sigma_size": self.sigma_size,
            "t_levels": list(self.t_levels),
            "threshold": self.threshold,
            "probability_bound": self.probability_bound,
            "weighted_exceed_fraction": self.weighted_exceed_fraction,
            "max_t": self.max_t,
            "pinsker_worst_slack": self.pinsker_worst_slack,
            "one_norm_convention": self.one_norm_convention,
            "selections": [
                {"selection": list(sel), "weight": w, "t": t_val, "levels": list(levels)}
                for sel, w, t_val, levels in self.selections
            ],
        }


def _pinsker_slack_over_conditionals(system: JointBoxSystem, selection, nu) -> float:
    """Worst lhs - rhs of the Pinsker pair over every realized conditioning of
    a two-device selection; negative means the inequality held everywhere."""
    if system.k != 2:
        raise ValueError("pairwise Pinsker sweep needs exactly two devices")
    sel = _check_selection(system, selection)
    N = system.total_uses
    g1 = system.use_index(0, sel[0] - 1)
    g2 = system.use_index(1, sel[1] - 1)
    cond = [g for j in range(2) for g in system.device_uses(j)[: sel[j] - 1]]
    rest = [g for g in range(N) if g not in set(cond + [g1, g2])]
    t = system.tensor
    nu = np.asarray(nu, dtype=float).reshape((system.num_inputs,) * N)
    if rest:
        t = t.sum(axis=tuple(rest), keepdims=True)
        for g in rest:
            t = np.take(t, [0], axis=N + g)
        nu = nu.sum(axis=tuple(rest), keepdims=True)
    worst = float("-inf")
    S, L = system.num_outputs, system.num_inputs
    it = np.ndindex(*([S] * len(cond) + [L] * len(cond) + [L, L]))
    for assign in it:
        x_cond = assign[: len(cond)]
        u_cond = assign[len(cond) : 2 * len(cond)]
        u1, u2 = assign[-2], assign[-1]
        index = [slice(None)] * (2 * N)
        for g, x in zip(cond, x_cond):
            index[g] = x
        for g, u in zip(cond, u_cond):
            index[N + g] = u
        index[N + g1] = u1
        index[N + g2] = u2
        block = t[tuple(index)]
        joint = np.squeeze(block)
        mass = joint.sum()
        if mass <= 0:
            continue
        lhs, rhs = pinsker_gap(np.asarray(joint).reshape(S, S) / mass)
        worst = max(worst, lhs - rhs)
    return worst


def definetti_check(system: JointBoxSystem, strategy, epsilon: float, t_levels,
                    sigma_size: int | None = None, pinsker: bool = False) -> DeFinettiReport:
    """Sweep every selection, weight it by the source, and compare T against
    the concentration threshold."""
    sigma = system.num_outputs if sigma_size is None else int(sigma_size)
    rhs = definetti_rhs(system.n, t_levels, epsilon, sigma)
    nu = sv_input_distribution(strategy, epsilon, system.total_uses, system.num_inputs)
    weights = sv_selection_distribution(strategy, epsilon, system.n)
    report = DeFinettiReport(
        n=system.n,
        epsilon=epsilon,
        sigma_size=sigma,
        t_levels=tuple(float(v) for v in t_levels),
        threshold=rhs.threshold,
        probability_bound=rhs.probability_bound,
    )
    exceed = 0.0
    for sel, w in sorted(weights.items()):
        t_val, levels = t_statistic_levels(system, sel, nu)
        if t_val > sum(levels) + 1e-9:
            raise AssertionError(
                f"level decomposition broken at selection {sel}: T={t_val} > sum Ti={sum(levels)}"
            )
        report.selections.append((sel, w, t_val, levels))
        report.max_t = max(report.max_t, t_val)
        if t_val >= rhs.threshold:
            exceed += w
        if pinsker:
            slack = _pinsker_slack_over_conditionals(system, sel, nu)
            report.pinsker_worst_slack = max(report.pinsker_worst_slack, slack)
    report.weighted_exceed_fraction = exceed
    return report

"""Compiled slot loops. Semantics mirror ``scheduler.select``; tests pin them together."""

import math

import numpy as np
from numba import njit


@njit(cache=True)
def schedule_cells(rates, weights, gamma, cell_ptr, credits, selections):
    """Run the credit scheduler over a precomputed ``(T, M)`` rate trace.

    Members of cell ``c`` occupy columns ``cell_ptr[c]:cell_ptr[c + 1]``.
    ``credits`` is updated in place; ``selections[t, c]`` receives the chosen column.
    """
    T = rates.shape[0]
    C = cell_ptr.shape[0] - 1
    for t in range(T):
        for c in range(C):
            lo = cell_ptr[c]
            hi = cell_ptr[c + 1]
            best = lo
            best_score = rates[t, lo] + gamma * credits[lo]
            for j in range(lo + 1, hi):
                s = rates[t, j] + gamma * credits[j]
                if s > best_score:
                    best_score = s
                    best = j
            for j in range(lo, hi):
                credits[j] += weights[j]
            credits[best] -= 1.0
            selections[t, c] = best


@njit(cache=True)
def simulate_chunk(
    fade,
    ifade,
    member_user,
    member_cell,
    member_nsp,
    member_dir,
    signal_mw,
    weights,
    credits,
    cell_ptr,
    bs_cell,
    beam,
    pair_ptr,
    pair_bs,
    pair_col,
    pair_power_mw,
    pair_dir,
    pair_ue_gain,
    bs_cos_half_beam,
    bs_main,
    bs_back,
    noise_mw,
    prefactor,
    rate_unit,
    gamma,
    served,
    cell_nsp_sum,
):
    """Advance a multi-cell drop by ``fade.shape[0]`` slots.

    ``fade[t, u]`` is the serving-link fading of user ``u``; ``ifade[t, pair_col[p]]``
    that of interference pair ``p``. Directions are unit vectors; a victim lies in
    an interferer's main lobe when the cosine to its beam is >= ``bs_cos_half_beam``.
    Interfering beams point at the user their BS served in the previous slot
    (``beam`` holds those directions and is updated in place).
    """
    T = fade.shape[0]
    M = member_user.shape[0]
    C = cell_ptr.shape[0] - 1
    rates = np.empty(M)
    new_beam = beam.copy()
    for t in range(T):
        for m in range(M):
            y = 0.0
            own = member_cell[m]
            for p in range(pair_ptr[m], pair_ptr[m + 1]):
                c2 = bs_cell[pair_bs[p]]
                if c2 < 0 or c2 == own:
                    continue
                cosang = pair_dir[p, 0] * beam[c2, 0] + pair_dir[p, 1] * beam[c2, 1]
                gb = bs_main if cosang >= bs_cos_half_beam else bs_back
                y += pair_power_mw[p] * gb * pair_ue_gain[p] * ifade[t, pair_col[p]]
            snr = signal_mw[m] * fade[t, member_user[m]] / (noise_mw + y)
            rates[m] = prefactor * math.log2(1.0 + snr)
        for c in range(C):
            lo = cell_ptr[c]
            hi = cell_ptr[c + 1]
            best = lo
            best_score = rates[lo] / rate_unit + gamma * credits[lo]
            for j in range(lo + 1, hi):
                s = rates[j] / rate_unit + gamma * credits[j]
                if s > best_score:
                    best_score = s
                    best = j
            for j in range(lo, hi):
                credits[j] += weights[j]
            credits[best] -= 1.0
            served[best] += rates[best]
            cell_nsp_sum[c, member_nsp[best] - 1] += rates[best]
            new_beam[c, 0] = member_dir[best, 0]
            new_beam[c, 1] = member_dir[best, 1]
        for c in range(C):
            beam[c, 0] = new_beam[c, 0]
            beam[c, 1] = new_beam[c, 1]

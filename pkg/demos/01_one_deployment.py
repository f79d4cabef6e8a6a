"""
Joint channel estimation and detection on one deployment
=========================================================

Sixteen single-antenna access points on a 400 m grid serve eight users.
Each user sends K orthogonal pilots followed by T data symbols.  We compare
three receivers on the same fadings:

* pilot-only MMSE channel estimates followed by centralized LMMSE detection,
* the bilinear EP receiver, which refines channels and symbols jointly,
* the same EP receiver handed the true channels.
"""
import numpy as np

import bilinear_ep as bep
from bilinear_ep import baselines, metrics

rng = np.random.default_rng(7)
sc = bep.make_scenario(bep.scenario.sample_ue_positions(rng, 8, 400.0),
                       bep.scenario.place_aps_grid(400.0, 4), T=20)
print(f"L={sc.L} APs, K={sc.K} users, T={sc.T} data symbols")

# %% draw 200 independent fadings of the same deployment
ch = bep.sample_channel(rng, sc, 200)
tx = bep.generate_transmission(rng, sc, ch)
priors = bep.estimate_channels(sc, tx.Yp)

# %% pilot-only channel estimates plus LMMSE detection over all AP antennas
Y = baselines.stack_observations(tx.Y)             # (..., L*N, T)
H_hat = baselines.stack_channels(priors.mean)      # (..., L*N, K)
lmmse = bep.centralized_lmmse_detect(Y, H_hat, sc.noise_var, sc.tx_power,
                                     sc.constellation)
print("LMMSE SER         ", metrics.ser(lmmse, tx.symbol_idx))

# %% EP iterations: watch the SER fall as messages are exchanged
state = bep.init_state(sc, priors, tx.Y)
for it in range(1, 11):
    state = bep.run_schedule(state, 1)
    res = bep.infer(state)
    print(f"EP iteration {it:2d}   SER {metrics.ser(res.decisions, tx.symbol_idx):.4f}")

# %% channel quality: error power relative to channel power, per link
H_true = np.swapaxes(ch.H, -1, -2)                 # (..., L, K, N)
pilot = metrics.link_nmse(priors.mean, H_true)
joint = metrics.link_nmse(res.h_mean, H_true)
keep = ~metrics.weak_link_mask(sc)
print(f"median link NMSE  pilot-only {np.median(pilot[keep]):.3f}"
      f"   joint EP {np.median(joint[keep]):.3f}")

# %% genie channels
genie = bep.perfect_csi_prior(ch.H, sc.gains)
ref = bep.detect(sc, genie, tx.Y)
print("EP perfect-CSI SER", metrics.ser(ref.decisions, tx.symbol_idx))

"""
Running the receiver across access points
==========================================

The same EP schedule can be split between access points and a central
unit.  Only symbol PMFs cross the fronthaul: each AP sends its outgoing
symbol beliefs up, the central unit multiplies them and sends back the
total.  Every message is a small binary packet, so the traffic is
counted exactly.
"""
import numpy as np

import bilinear_ep as bep
from bilinear_ep import fronthaul as fh

rng = np.random.default_rng(11)
sc = bep.make_scenario(bep.scenario.sample_ue_positions(rng, 8, 400.0),
                       bep.scenario.place_aps_grid(400.0, 4), T=10)
ch = bep.sample_channel(rng, sc)
tx = bep.generate_transmission(rng, sc, ch)
state = bep.init_state(sc, bep.estimate_channels(sc, tx.Yp), tx.Y)

# %% one message on the wire
pmf = bep.CategoricalMessage(sc.constellation, [0.7, 0.1, 0.1, 0.1])
payload = fh.serialize(3, 5, 2, pmf)
print(len(payload), "bytes:", payload.hex())
print(fh.deserialize(payload, sc.constellation))

# %% monolithic and distributed runs agree bit for bit
mono = bep.infer(bep.run_schedule(state, 10))
dist_state, ledger = bep.run_distributed(state, 10)
dist = bep.infer(dist_state)
print("identical PMFs:", np.array_equal(mono.pmf, dist.pmf))

# %% traffic per iteration
print("uplink messages  ", ledger.uplink_count)
print("downlink messages", ledger.downlink_count)
print("bytes per iteration, each way:", ledger.uplink_bytes[0])
print("Gaussian messages on the fronthaul:", ledger.gaussian_messages)

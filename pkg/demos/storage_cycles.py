"""Walk one photon through the loop memory and watch the bookkeeping.

Builds the short-delay-line configuration, stores a few input states for
increasing cycle counts, and prints where every bit of probability went.
Run with: python demos/storage_cycles.py
"""
import math

from loopmem import (
    D, H, MemoryConfig, R, TransmissionParams, derive_transmission_params,
    efficiency, f8_path_trace, fidelity, simulate_storage, switch_schedule,
)

params = TransmissionParams(g13=0.541, g12=0.419, g22=0.50, g23=0.662)
cfg = MemoryConfig.from_params(params, delta_tau=36.5)

print("Short delay line, 36.5 ns per round trip")
print(f"segment transmissions: {derive_transmission_params(cfg)}")
print()

print("retrieved weight vs cycle count, simulated against the closed form")
print(f"{'N':>3} {'simulated':>12} {'closed form':>12} {'retrieval ns':>13}")
for n in range(0, 7):
    out = simulate_storage(cfg, H, n)
    print(f"{n:>3} {out.retrieved_weight:>12.6f} {efficiency(params, n):>12.6f}"
          f" {out.retrieved.time:>13.2f}")
print()

# the drive schedule is what turns a cycle count into hardware timing
for n in (0, 1, 3):
    sched = switch_schedule(n, cfg)
    print(f"N={n}: switch transitions {sched.transitions}")
print()

print("both polarization components traverse the same elements (N=1):")
trace = f8_path_trace(1)
print("  H:", " -> ".join(trace.h_path))
print("  V:", " -> ".join(trace.v_path))
print()

# a static phase in the delay line cancels because of that common path
from loopmem import ComponentSpec, FIBER_SEGMENT, FPC, RETROREFLECTOR

noisy = MemoryConfig.from_params(
    params, delta_tau=36.5,
    delay_zone=(ComponentSpec(FIBER_SEGMENT, static_phase=1.3),
                ComponentSpec(RETROREFLECTOR), ComponentSpec(FPC)))
for state, name in ((H, "H"), (D, "D"), (R, "R")):
    out = simulate_storage(noisy, state, 2)
    print(f"1.3 rad delay phase, input {name}: "
          f"fidelity {fidelity(out.retrieved.state, state):.9f}")
print()

# a switch rotation error is different: it ejects weight but what stays is clean
from loopmem import POCKELS_CELL

for eps in (0.02, 0.1):
    lossy = MemoryConfig.from_params(
        params, delta_tau=36.5,
        switch_zone=(ComponentSpec(POCKELS_CELL, rotation_error=eps),))
    out = simulate_storage(lossy, D, 3)
    expected = efficiency(params, 3) * math.cos(eps) ** 4
    print(f"rotation error {eps} rad: weight {out.retrieved_weight:.6f} "
          f"(cos^4 model {expected:.6f}), "
          f"fidelity {fidelity(out.retrieved.state, D):.9f}, "
          f"{len(out.exits) - 1} early exit(s)")

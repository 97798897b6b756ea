"""Phase-switched pulse train resonant with the Rabi period.

Feed the cavity a train of rectangular pulses whose carrier phase flips
by pi between consecutive pulses. When the pulse length tau matches half
an intensity beat (tau close to 2*pi/Omega_R, about 52 ns at the working
coupling), each phase flip arrives exactly when the field has swung
around, so the pulses pump the oscillation coherently and the envelope
grows far beyond the steady drive level. Detuned taus kick the field out
of phase and the buildup stalls.

Runs in roughly ten seconds. Saves pulse_train_revival.png when
matplotlib is importable.
"""

import numpy as np

from cavityspin.harness import ScenarioConfig, run_scenario

taus = [46.0, 48.0, 50.0, 52.0, 54.0, 56.0, 58.0]

config = ScenarioConfig.from_mapping({
    "scenario": "train-map",
    "system": {"cavity_ghz": 2.6915, "kappa_mhz": 0.8, "coupling_mhz": 8.56},
    "density": {"kind": "qgauss", "q": 1.39, "fwhm_mhz": 9.4},
    "drive": {"kind": "train", "tau_ns": 52.0, "n_pulses": 11},
    "grid": {"dt_ns": 0.2},
    "sweep": [{"parameter": "tau_ns", "values": taus}],
})

table = run_scenario(config)
tau_col = table.column("tau_ns")
t = table.column("t_ns")
a2 = table.column("abs_A2")

# Steady level of a plain long pulse at the same drive amplitude, for
# scale: the resonant train should overshoot it by a large factor.
steady_cfg = ScenarioConfig.from_mapping({
    "scenario": "long-pulse",
    "system": {"cavity_ghz": 2.6915, "kappa_mhz": 0.8, "coupling_mhz": 8.56},
    "density": {"kind": "qgauss", "q": 1.39, "fwhm_mhz": 9.4},
    "drive": {"kind": "rect", "duration_ns": 800.0},
    "grid": {"dt_ns": 0.2, "t_end_ns": 800.0},
})
steady_a2 = run_scenario(steady_cfg).column("abs_A2")[-200:].mean()

print(f"{'tau (ns)':>8}  {'max |A|^2':>10}  {'/ steady':>8}")
best_tau, best_max = None, -1.0
for tau in taus:
    m = a2[tau_col == tau].max()
    print(f"{tau:8.1f}  {m:10.4e}  {m / steady_a2:8.1f}")
    if m > best_max:
        best_tau, best_max = tau, m
print(f"resonant tau = {best_tau:.0f} ns "
      f"(2*pi/Omega_R at this coupling is about 51.4 ns)")

try:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt
except ImportError:
    print("matplotlib not installed; skipping the figure")
else:
    fig, ax = plt.subplots(figsize=(8.0, 4.2))
    for tau in taus:
        sel = tau_col == tau
        lw = 1.4 if tau == best_tau else 0.6
        ax.plot(t[sel], a2[sel] / steady_a2, lw=lw, label=f"tau = {tau:.0f} ns")
    ax.set_xlabel("t (ns)")
    ax.set_ylabel("|A|^2 / steady drive level")
    ax.set_title("Phase-switched train: buildup vs pulse length")
    ax.legend(fontsize=7, ncol=2)
    fig.tight_layout()
    fig.savefig("pulse_train_revival.png", dpi=150)
    print("wrote pulse_train_revival.png")

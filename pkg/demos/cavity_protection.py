"""Cavity protection: line shape tails decide the settled train level.

Run the same phase-switched pulse train twice at strong coupling
(25 MHz): once on the measured heavy-tailed line shape (q-Gaussian,
q = 1.39) and once on a Lorentzian twin matched to the same Rabi
frequency and long-time decay rate. The Lorentzian's fat spectral tails
keep draining the polaritons, so its train settles roughly twenty times
lower in intensity. Protection is a statement about spectral wings, not
width: both ensembles here have comparable FWHM.

Runs in a few seconds. Saves cavity_protection.png when matplotlib is
importable.
"""

from cavityspin.harness import ScenarioConfig, run_scenario

config = ScenarioConfig.from_mapping({
    "scenario": "train-compare",
    "system": {"cavity_ghz": 2.6915, "kappa_mhz": 0.8, "coupling_mhz": 25.0},
    "density": {"kind": "qgauss", "q": 1.39, "fwhm_mhz": 9.4},
    "drive": {"kind": "train", "tau_ns": 19.5, "n_pulses": 70},
    "grid": {"dt_ns": 0.1},
})

table = run_scenario(config)
t = table.column("t_ns")
main = table.column("abs_A2_main")
twin = table.column("abs_A2_twin")

settled = slice(int(0.8 * table.n_rows), None)
ratio = main[settled].max() / twin[settled].max()
print(f"settled intensity, q-Gaussian ensemble: {main[settled].max():.4e}")
print(f"settled intensity, Lorentzian twin:     {twin[settled].max():.4e}")
print(f"protection factor (settled ratio) = {ratio:.1f}")

try:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt
except ImportError:
    print("matplotlib not installed; skipping the figure")
else:
    fig, ax = plt.subplots(figsize=(8.0, 4.2))
    ax.semilogy(t, main, lw=0.7, label="q-Gaussian ensemble")
    ax.semilogy(t, twin, lw=0.7, label="Lorentzian twin (matched "
                                       "Rabi frequency and decay rate)")
    ax.set_xlabel("t (ns)")
    ax.set_ylabel("|A|^2")
    ax.set_title("Same pulse train, two line shapes, 25 MHz coupling")
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig("cavity_protection.png", dpi=150)
    print("wrote cavity_protection.png")

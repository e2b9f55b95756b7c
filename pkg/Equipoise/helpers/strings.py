class TEXTS:
    BOOTED = (
        "Equipoise {0} | Python {1} | NumPy {2} | SciPy {3} | pandas {4}"
    )
    ESTIMATE_ROW = (
        "{0:<10} {1:<9} {2:<9} estimate {3:>12}  se {4:>10} ({5})  95% CI {6}\n"
        "{7:<30} ESS treated {8:>10}  ESS control {9:>10}  VI {10:>8}"
    )
    EXTREME_WEIGHTS = (
        "{0}: {1} units carry a raw weight above {2}; first rows {3}. "
        "Positivity looks violated for these units."
    )
    BALANCE = (
        "Covariate balance under {0}:\n"
        "{1}"
    )
    OVERLAP = (
        "Propensity overlap:\n"
        "{0}\n"
        "prevalence {1} | variance ratio {2} | equipoise lean {3}"
    )
    SIMULATED = (
        "{0} replicates of {1} finished in {2}; summary written to {3}"
    )
    TRUTH = (
        "True estimands for {0} (superpopulation {1}):\n"
        "{2}"
    )
    WROTE = "Wrote {0}"
    FAILED = "error kind={0}: {1}"

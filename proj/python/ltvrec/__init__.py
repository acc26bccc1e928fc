"""Offline lifetime-value policy pipeline for recommender logs."""

try:
    from ltvrec._core import (  # type: ignore[attr-defined]
        DataError,
        NumericError,
        PairedComparison,
        Pipeline,
        RunConfig,
        WilcoxonResult,
        derive_seed,
        load_config,
        set_config_key,
        simulate_latent,
        wilcoxon_one_sided,
        wilcoxon_test,
    )
except ImportError:  # build-tree layout: _core.so sits directly on sys.path
    from _core import (  # type: ignore[no-redef]
        DataError,
        NumericError,
        PairedComparison,
        Pipeline,
        RunConfig,
        WilcoxonResult,
        derive_seed,
        load_config,
        set_config_key,
        simulate_latent,
        wilcoxon_one_sided,
        wilcoxon_test,
    )

__all__ = [
    "DataError",
    "NumericError",
    "PairedComparison",
    "Pipeline",
    "RunConfig",
    "WilcoxonResult",
    "derive_seed",
    "load_config",
    "set_config_key",
    "simulate_latent",
    "wilcoxon_one_sided",
    "wilcoxon_test",
]

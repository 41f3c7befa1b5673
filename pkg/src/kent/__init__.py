"""k-type topological entropy for Z^d-actions."""
from .counting import (chain_check, exact_cov, exact_sep, exact_span, greedy_separated, greedy_spanning,
                       k_metric)
from .entropy import (ball_sides, ball_sides_bruteforce, estimate, growth_rate, iterate_bound_check,
                      shift_sep_oracle, toral_formula)
from .lattice import IndexSetMode, KIndex, all_k, index_set, k_bits, k_geq, k_greater
from .systems import (SampleConfig, make_conjugate, make_finite, make_iterate, make_product, make_toral,
                      ShiftSystem, TranslationSystem)

__version__ = "0.1.0"

"""Truncated simulation and certified inference for edge-exchangeable
networks built from completely random measures."""

from .bounds import (BoundMethod, BoundReport, bound_categorical,
                     bound_closed_form, bound_conditional,
                     bound_independent_mc, tv_bound_forward)
from .errors import (InsufficientSupportError, NonTerminationError,
                     ParameterError, QuadratureError)
from .inference import (AdaptConfig, ChainConfig, ChainState, Hyperprior,
                        TVCertificate, adapt_truncation, gibbs_gamma,
                        log_posterior_truncated, mh_step, predict_bound_at_k,
                        run_chain, tv_certificate)
from .measures import (Family, RateMeasureSpec, Representation, TruncatedCRM,
                       beta_process, custom_measure, extend_inverse_levy,
                       gamma_process, power_law_measure, sample_inverse_levy,
                       sample_rejection)
from .netgen import (EdgeCounts, LikelihoodModel, LikKind,
                     bernoulli_likelihood, binarize_undirect,
                     max_vertex_index, network_stats, poisson_likelihood,
                     simulate_categorical, simulate_independent,
                     truncate_edges)

__version__ = "0.1.0"

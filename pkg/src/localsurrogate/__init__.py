"""Deterministic local linear explanations for tabular regression."""

from .agreement import AgreementScore, delta_mu, r_lower_bound, t_quantile, universal_r
from .counterfactual import (CounterfactualExplanation, CounterfactualQuery, counterfactual,
                             find_candidates, make_query, verify_counterfactual)
from .dataset import (DataPoint, Dataset, EncodedMatrix, FeatureSchema, encode, from_columns,
                      load_csv, load_schema)
from .distance import compute_distances, cooccurrence_model, generalized_distance
from .evaluation import EvaluationReport, evaluate
from .explainer import Explanation, explain, optimal_neighborhood_search, render_explanation
from .surrogate import SurrogateModel, lasso_cv, lasso_fit, train_local_surrogate, vif_filter

__version__ = "0.1.0"

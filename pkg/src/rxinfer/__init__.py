"""Exact finite-sample randomization inference on potential-outcome type counts."""

__version__ = "0.1.0"

from .core import (  # noqa: E402
    IID, DataConfiguration, InvalidInput, LikelihoodValue, TypeConfiguration, Urn,
    enumerate_data_configs, enumerate_type_configs, lattice, lattice_size, parse_spec,
)
from .likelihood import (  # noqa: E402
    assignment_count, compatible_count, exact_likelihood, general_likelihood, iid_likelihood, likelihood,
    urn_likelihood,
)
from .hypothesis import HypothesisSet, parse_hypothesis  # noqa: E402
from .inference import TestResult, confidence_interval, lambda_statistic, p_value  # noqa: E402
from .table import LambdaTable, build_lambda_table, load_table  # noqa: E402
from .extensions import (  # noqa: E402
    PopulationConfiguration, SharePair, asymptotic_likelihood_iid, asymptotic_likelihood_urn,
    bfh_lower_bounds, limited_data_likelihood, limited_data_p_value, population_mle, two_proportion_test,
)

__all__ = [
    "IID", "Urn", "DataConfiguration", "TypeConfiguration", "LikelihoodValue", "InvalidInput",
    "enumerate_type_configs", "enumerate_data_configs", "lattice", "lattice_size", "parse_spec",
    "assignment_count", "compatible_count", "exact_likelihood", "general_likelihood", "iid_likelihood",
    "likelihood", "urn_likelihood", "HypothesisSet", "parse_hypothesis", "TestResult", "confidence_interval",
    "lambda_statistic", "p_value", "LambdaTable", "build_lambda_table", "load_table",
    "PopulationConfiguration", "SharePair", "asymptotic_likelihood_iid", "asymptotic_likelihood_urn",
    "bfh_lower_bounds", "limited_data_likelihood", "limited_data_p_value", "population_mle",
    "two_proportion_test",
]

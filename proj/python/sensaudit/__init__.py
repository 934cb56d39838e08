"""Exact sensitivity auditing of stratified randomized experiments with
binary outcomes subject to misclassification."""

from sensaudit._core import (
    Experiment,
    accuracy,
    alteration_count,
    analyze,
    chisq_quantile,
    classify_design,
    design_accuracy,
    exact_pvalue,
    expected_misclassification_table,
    load_experiment,
    load_experiment_csv,
    mh_moments,
    mh_statistic,
    oracle,
)

__all__ = [
    "Experiment",
    "accuracy",
    "alteration_count",
    "analyze",
    "chisq_quantile",
    "classify_design",
    "design_accuracy",
    "exact_pvalue",
    "expected_misclassification_table",
    "load_experiment",
    "load_experiment_csv",
    "mh_moments",
    "mh_statistic",
    "oracle",
]

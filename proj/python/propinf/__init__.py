"""Property inference attack laboratory: Python bindings over the C++ core."""

from ._core import (  # noqa: F401
    AttackConfig,
    AttackOutcome,
    ConfidenceLearning,
    DistinguishingTest,
    EstimationStep,
    EstimationTrace,
    LabelOnlyRate,
    Metrics,
    PoisonSet,
    PoisonedMoments,
    PropertyPredicate,
    Record,
    SynthSpec,
    TabularDataset,
    ThresholdResult,
    TrainedModel,
    batch_logits,
    bayes_from_spec,
    build_poison_set,
    choose_labels,
    concat,
    construct_world,
    distinguish,
    estimate_property_size,
    evaluate,
    exact_marginals,
    label_only_distinguish,
    label_only_rate,
    learn_confidence_model,
    load_csv,
    mix_poison_spec,
    optimal_threshold,
    poisoned_logit,
    poisoned_moments,
    required_queries,
    sample_query_set,
    select_poison_rate_by_variance,
    split,
    synth_sample,
    train,
    write_csv,
)

__all__ = [name for name in dir() if not name.startswith("_")]
__version__ = "0.1.0"

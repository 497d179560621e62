"""Hyperspectral image classification with class-based denoising
autoencoders, mixed-pixel training augmentation, and morphological cleanup."""

from .augment import AugmentedSample, MixedPixelAugmenter, MixParams, build_augmented_set, mix_pair
from .classifier import (
    MlpNetwork,
    MlpTopology,
    SgdHyper,
    SoftmaxMlpClassifier,
    forward,
    gradient_check,
    init_network,
    predict,
    train,
)
from .cube import (
    HsiCube,
    LabelMap,
    NormStats,
    SceneSpec,
    SplitAssignment,
    apply_normalizer,
    fit_normalizer,
    load_cube,
    save_dataset,
    stratified_split,
    synth_scene,
)
from .features import FeatureConfig, MdaeFeatures, assemble, assemble_batch, train_models
from .harness import (
    ExperimentConfig,
    ResultRecord,
    confusion_matrix,
    overall_accuracy,
    run_ablation,
    run_experiment,
)
from .mdae import (
    ClassMdae,
    MdaeModel,
    MdaeParams,
    encode,
    reconstruction_mse,
    replicate_and_corrupt,
    solve_mdae,
    train_class_mdae,
)
from .postproc import ClassMap, clean_map, fill_holes

__version__ = "0.1.0"

__all__ = [
    "AugmentedSample", "MixedPixelAugmenter", "MixParams", "build_augmented_set",
    "mix_pair", "MlpNetwork", "MlpTopology", "SgdHyper", "SoftmaxMlpClassifier",
    "forward", "gradient_check", "init_network", "predict", "train", "HsiCube",
    "LabelMap", "NormStats", "SceneSpec", "SplitAssignment", "apply_normalizer",
    "fit_normalizer", "load_cube", "save_dataset", "stratified_split",
    "synth_scene", "FeatureConfig", "MdaeFeatures", "assemble", "assemble_batch",
    "train_models", "ExperimentConfig", "ResultRecord", "confusion_matrix",
    "overall_accuracy", "run_ablation", "run_experiment", "ClassMdae",
    "MdaeModel", "MdaeParams", "encode", "reconstruction_mse",
    "replicate_and_corrupt", "solve_mdae", "train_class_mdae", "ClassMap",
    "clean_map", "fill_holes",
]

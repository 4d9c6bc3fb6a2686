"""Bag-of-sounds multimodal hate-speech classification.

Audio clips become flattened, min-max scaled Mel-spectrogram vectors and
text becomes smoothed TF-IDF vectors; either feeds one of four classical
classifiers (multinomial naive Bayes, linear SVM, logistic regression,
random forest) trained and evaluated under a deterministic stratified
75:25 split with macro F1 as the headline metric.
"""

from .audio_features import (
    FeatureMatrix,
    FeatureVector,
    MelFilterbank,
    MinMaxNormalizer,
    Provenance,
    Spectrogram,
    SpectrogramAxis,
    StftConfig,
    Waveform,
    WindowKind,
    build_mel_filterbank,
    decode_wav,
    flatten,
    hz_to_mel,
    mel_spectrogram,
    mel_to_hz,
    min_max_normalize,
    pad_to_shape,
    power_to_db,
    resample,
    stft,
)
from .bundle import ModelBundle, bundle_predict, load_bundle, save_bundle
from .classifiers import (
    ForestModel,
    LinearModel,
    Method,
    NBModel,
    TrainConfig,
    predict,
    predict_scores,
    train,
)
from .corpus import (
    Dataset,
    LabelScheme,
    SchemeKind,
    SplitSpec,
    Utterance,
    class_distribution,
    load_manifest,
    stratified_split,
)
from .errors import BagOfSoundsError, ConfigError, DataError
from .evaluation import (
    ClassificationReport,
    ConfusionMatrix,
    confusion,
    report,
    sweep_summary,
)
from .pipeline import AudioConfig, Modality, SpeechFeaturizer, TextFeaturizer
from .text_features import (
    CountMatrix,
    TfidfModel,
    Vocabulary,
    count_transform,
    fit_tfidf,
    fit_vocabulary,
    tfidf_transform,
    tokenize,
)

__version__ = "0.1.0"

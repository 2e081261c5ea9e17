"""jamforge: a desk-scale laboratory for compound GNSS jamming.

Synthesizes jammed satnav captures, renders Choi-Williams spectrograms,
and trains a small numpy CNN with asymmetric convolution blocks to name
the interference pair.
"""

__version__ = "0.1.0"

from .rng import Rng, mix64
from .cacode import CODE_LENGTH, generate_ca_code
from .signals import (
    COMPOUND_PAIRS,
    NUM_CLASSES,
    ComplexSignal,
    CompoundSpec,
    GnssParams,
    JammerSpec,
    average_power,
    compose_compound,
    gen_jammer,
    gen_lfmj,
    gen_mtj,
    gen_pbnj,
    gen_ppnj,
    gen_stj,
    generate_gnss_signal,
    mixing_gains,
    noise_power,
    synthesize_received,
    synthesize_received_parts,
    unit_normalize,
)
from .cwd import (
    CwdConfig,
    Spectrogram,
    cwd,
    cwd_complex,
    cwd_frequencies,
    to_spectrogram,
    write_pgm,
    write_raw_f32,
)
from .dataset import (
    DatasetConfig,
    DatasetFormatError,
    LoadedDataset,
    generate_dataset,
    load_dataset,
    make_sample,
    sample_jammer_spec,
    sample_seed,
    split_dataset,
)
from .model import (
    EvalReport,
    NetConfig,
    TrainConfig,
    TrainingDiverged,
    build_classifier,
    evaluate,
    fuse_model,
    kappa_from_confusion,
    oa_from_confusion,
    predict,
    preset_config,
    report_complexity,
    train,
)

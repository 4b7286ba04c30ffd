"""Less noisy broadcast channels: orderings, rate regions and coding simulation."""

__version__ = "0.1.0"

from .channels import (
    BroadcastChannel,
    ChannelMatrix,
    bsc,
    compose,
    entropy,
    identity,
    mutual_information,
    product_channel,
    validate_channel,
)
from .coding import SimConfig, SimResult, generate_codebooks, run_trials
from .errors import (
    AllZeroWeights,
    AlphabetOverflow,
    DimensionMismatch,
    LessNoisyError,
    MemoryCapExceeded,
    NotApplicable,
    ParseError,
    RowSumNotOne,
    ValidationError,
)
from .interleave import InterleavingCertificate, builtin_certificate, verify_certificate
from .lemma import MultiLetterInstance, lemma_slacks, stress_test
from .ordering import OrderStatus, is_degraded, less_noisy_test, order_chain
from .region import (
    AuxiliaryJoint,
    OptimizeOptions,
    RateTuple,
    brute_force_region,
    maximize_weighted_sum,
    rates_from_aux,
    region_boundary,
    two_receiver_region,
)

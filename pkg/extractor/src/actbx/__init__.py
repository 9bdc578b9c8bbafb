"""actbx: Inception-v3 activation extraction to ACTB files and probs CSVs."""

__version__ = "0.1.0"

from .actb import write_actb
from .errors import ActbxError, ExtractionError, FormatError
from .inputs import load_idx, load_image_dir, load_source
from .model import LAYER_DIMS, ExtractionJob, InceptionTaps

"""Blob database, semantically aligned canvas composition and emulated training canvases."""
from .blobdb import BlobDatabase, BlobRecord, extract_blobs
from .canvas import CanvasBundle, compose, make_canvas, plan_composition, repair_holes
from .classes import ClassTable, cityscapes_classes
from .config import PipelineConfig, load_config
from .dataset import SceneAnnotation
from .depth import aligned_sparse_depth, sparsify
from .emulation import EmulationParams, make_training_example
from .metrics import ConfusionMatrix, depth_rmse
from .shape import DescriptorIndex, ShapeDescriptor, hu_descriptor

__version__ = "0.1.0"

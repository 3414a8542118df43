"""qcuts3d: spectral graph-cut binary segmentation of volumetric
tomography images of porous media, with evaluation metrics, synthetic
phantoms and graph-Fourier reconstruction analysis."""

from .errors import (ArgumentError, ConvergenceError, DataError,
                     DegenerateInputError, FormatError, IoError,
                     PlacementError, QCutsError)
from .gft import (DEFAULT_FRACTIONS, SpectrumBasis, laplacian_spectrum,
                  phase_fraction_signal, project_reconstruct,
                  reconstruction_curve)
from .graph import (SupervoxelGraph, apply_hamiltonian, build_graph,
                    dense_hamiltonian, select_pore_seeds, unary_potentials,
                    weighted_degrees)
from .metrics import (MetricsReport, auroc, confusion_counts, evaluate,
                      jaccard, misclassification_error, roc_curve)
from .phantom import PhantomSpec, generate, place_spheres
from .qcuts import SaliencyVector, quantum_cut, saliency_from_eigenvector, \
    smallest_eigenpair
from .segmentation import (DEFAULT_SCALES, SaliencyField, SegmentationResult,
                           kmeans2, majority_vote, segment_volume, voxelize)
from .supervoxel import (SupervoxelMap, export_supervoxels, slic3d,
                         supervoxel_means)
from .volume import (LabelVolume, SegmentationMask, Volume,
                     binarize_ground_truth, contrast_adjust, load_field,
                     load_labels, load_mask, load_volume, save_field,
                     save_labels, save_mask, save_volume)

__version__ = "0.1.0"

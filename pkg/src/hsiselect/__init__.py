"""Information-theoretic band selection for hyperspectral images.

Modules
-------
cube       hyperspectral cube, ground truth, quantization, splits
info       histogram entropy / mutual information estimators and a PMF oracle
selectors  greedy forward selection (MIM, MIBF, MIFS, mRMR, NMIFS, JMI, DISR, MRMS)
svm        RBF support vector machine trained with SMO, one-vs-one
metrics    OA / AA / kappa / specificity and classification maps
datasets   ENVI I/O, synthetic cubes, reports and traces
"""

from .cube import GroundTruth, HyperCube
from .selectors import METHODS, SelectionTrace, SelectorConfig, select

__all__ = ["GroundTruth", "HyperCube", "METHODS", "SelectionTrace", "SelectorConfig", "select"]
__version__ = "0.1.0"

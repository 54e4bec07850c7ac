from .test_cli import TestCli
from .test_config import TestGameConfigResolution, TestRunConfig
from .test_coupling import (
    TestBumpCoupling,
    TestCouplingEvaluation,
    TestCouplingRegistry,
    TestMakeCoupling,
)
from .test_dynamics import (
    TestCoalesceRound,
    TestDetectClusters,
    TestIsFixedPoint,
    TestIterate,
    TestLocalStability,
    TestPopulationSummary,
    TestSplitGame,
)
from .test_equilibrium import (
    TestBestResponse,
    TestErrorBounds,
    TestGameConfig,
    TestRealizedCost,
    TestTildeE,
)
from .test_measures import (
    TestEmpiricalMeasure,
    TestGrid,
    TestInitialDistribution,
    TestMeasureTools,
    TestW1Distance,
)
from .test_reproduction import TestReferenceRuns
from .test_stability import (
    TestAssembly,
    TestClassify,
    TestCMatrix,
    TestSpectrum,
    TestTaylorResidual,
)

from qtraj.models.artifact import ArtifactRecord, RunEvent
from qtraj.models.basis import BasisSet, ModeSolution, Parity, Units
from qtraj.models.fields import PotentialKind, PotentialSpec, QuantumMatrixField, WignerField
from qtraj.models.grid import Grid1D, QuadratureRule
from qtraj.models.report import CheckResult, PhysicsReport
from qtraj.models.synth import CoefficientMatrix, PacketStats, ScalarProductSpec
from qtraj.models.targets import DensityTriple, Mollifier, TargetKind, TargetTrajectory
from qtraj.models.two_particle import SeparabilityResiduals, TwoParticleField, TwoParticleObservables

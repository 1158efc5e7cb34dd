import logging
from robotlibcore import DynamicCore

from QFP.Config import Config
from QFP.Experiment import Experiment
from QFP.Gates import Gates
from QFP.Measurement import Measurement
from QFP.Network import Network
from QFP.QKD import QKD
from QFP.Resonator import Resonator
from QFP.Tables import Tables
from QFP.Tomography import Tomography


class Photonics(DynamicCore):
    """Library combining every frequency-bin simulation library, from
    the biphoton source to network planning, in one import.
    """

    ROBOT_LIBRARY_SCOPE = "GLOBAL"

    def __init__(self):
        self.logger = logging.getLogger(__name__)

        # Register keyword libraries to LibCore
        libraries = [
            Config(),
            Resonator(),
            Gates(),
            Measurement(),
            Tomography(),
            QKD(),
            Network(),
            Tables(),
            Experiment(),
        ]
        super().__init__(libraries)

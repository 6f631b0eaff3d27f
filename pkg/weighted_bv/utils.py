"""
:Title:        WEIGHTED-BV
:Created:      October-2026
:Authors:      weighted_bv developers

Utility functions: logger setup, output folders and the exception types of the package.
"""
import logging
import os
import shutil
import sys


def setup_logger(level=logging.INFO):
    """ set up logger"""
    logging.basicConfig(stream=sys.stdout, level=level, format="%(message)s", datefmt='%Y-%m-%d %H:%M:%S')
    logging.captureWarnings(True)


class StringUtils:
    """
    This class handles some strings for logging and output folders
    """

    @staticmethod
    def print_stage(stage):
        """ logs a pipeline stage banner

        :param stage: name of the stage """
        logging.info(f"\n--- {stage} ---\n")

    @classmethod
    def setup_output_folder(cls, analysis):
        """
        creates the output folder of a run and cleans it if requested

        :param analysis: analysis section of the config
        :return: output folder
        """
        if not os.path.exists(analysis["folder_output"]):
            os.makedirs(analysis["folder_output"])
        out_folder = cls.get_output_folder(analysis)
        if not os.path.exists(out_folder):
            os.mkdir(out_folder)
        else:
            logging.warning(f"The output folder '{out_folder}' already exists")
            if analysis["overwrite_output"]:
                logging.warning("Existing files will be overwritten!")
                for filename in os.listdir(out_folder):
                    file_path = os.path.join(out_folder, filename)
                    if os.path.isfile(file_path) or os.path.islink(file_path):
                        os.unlink(file_path)
                    elif os.path.isdir(file_path):
                        shutil.rmtree(file_path)
        return out_folder

    @staticmethod
    def get_output_folder(analysis):
        """
        return name of output folder

        :param analysis: analysis section of the config
        :return: output folder
        """
        run_name = analysis["scenario"] if analysis["scenario"] else "custom"
        return os.path.join(analysis["folder_output"], f"{analysis['command']}_{run_name}")


class MalformedSpecError(ValueError):
    """
    Exception raised when a measure or function document violates its schema
    """

    def __init__(self, reason="The document does not follow the expected schema"):
        """
        Initializes the class

        :param reason: what is wrong with the document
        """
        self.message = f"Malformed document: {reason}"
        super().__init__(self.message)


class NegativeWeightError(ValueError):
    """
    Exception raised when a measure has a negative cell weight
    """

    def __init__(self, index=None, value=None):
        self.index = index
        self.value = value
        self.message = f"Cell weights must be non-negative, found {value} at cell {index}"
        super().__init__(self.message)


class ZeroTotalMassError(ValueError):
    """
    Exception raised when all cell weights vanish
    """

    def __init__(self):
        self.message = "The measure has zero total mass"
        super().__init__(self.message)


class EpsTooSmallError(ValueError):
    """
    Exception raised when a mollification scale does not reach the neighbouring cells
    """

    def __init__(self, eps, spacing):
        self.message = f"Mollification scale {eps} is smaller than the grid spacing {spacing}"
        super().__init__(self.message)


class RadiusTooSmallError(ValueError):
    """
    Exception raised when a Lipschitz stencil misses the diagonal neighbours
    """

    def __init__(self, radius, minimum):
        self.message = f"Stencil radius {radius} is below the smallest legal radius {minimum}"
        super().__init__(self.message)


class EmptyRegionError(ValueError):
    """
    Exception raised when an open region is empty after erosion
    """

    def __init__(self, margin):
        self.message = f"The region has no support cells left after eroding {margin} cells"
        super().__init__(self.message)


class NotAdmissibleError(ValueError):
    """
    Exception raised when a vector field is not admissible for the measure
    """

    def __init__(self, certificate):
        self.message = (f"Vector field is not admissible: sup norm {certificate.sup_norm:.3e}, "
                        f"tangency residual {certificate.tangency_residual:.3e}, "
                        f"max divergence {certificate.max_divergence:.3e}")
        super().__init__(self.message)


class InconsistentFluxError(ValueError):
    """
    Exception raised when the cellwise flux balance of a graph does not match the divergence
    """

    def __init__(self, residual):
        self.message = f"Graph divergence deviates from the field divergence by {residual:.3e}"
        super().__init__(self.message)


class SolverDivergedError(RuntimeError):
    """
    Exception raised when an iterative linear solve exceeds its iteration cap
    """

    def __init__(self, status="The iterative solver did not converge"):
        self.message = f"The linear solve failed: {status}"
        super().__init__(self.message)


class NotStabilizedError(RuntimeError):
    """
    Exception raised when an averaged slope sequence is not Cauchy within tolerance
    """

    def __init__(self, change, tolerance):
        self.message = f"Averaged slopes changed by {change:.3e} in L1, above the tolerance {tolerance:.3e}"
        super().__init__(self.message)


class NotConvergedWarning(RuntimeWarning):
    """
    Warning issued when a primal-dual solve stops with a certified gap above tolerance
    """

from services.experiment_service import ExperimentService


def get_experiment_service() -> ExperimentService:
    """Dependency provider for ExperimentService"""
    return ExperimentService()

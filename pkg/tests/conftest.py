import sys
from pathlib import Path

import pytest
import torch

from oarseg.data import make_synthetic_dataset

sys.path.insert(0, str(Path(__file__).parent))

torch.set_num_threads(2)


@pytest.fixture(scope="session")
def tiny_synth_root(tmp_path_factory):
    """4 phantoms of 16^3, for fast engine tests (ratios 0.5/0.25/0.25)."""
    root = tmp_path_factory.mktemp("tiny_synth")
    make_synthetic_dataset(root, n_patients=4, shape=(16, 16, 16), seed=11)
    return root


@pytest.fixture(scope="session")
def synth_root_8(tmp_path_factory):
    """The 8-volume 32^3 phantom corpus used by the acceptance pipeline."""
    root = tmp_path_factory.mktemp("synth8")
    make_synthetic_dataset(root, n_patients=8, shape=(32, 32, 32), seed=0)
    return root


def tiny_experiment_dict(root, run_name, mode, epochs, seed=17, **model_over):
    model = {
        "variant": "resunet3d",
        "num_classes": 4,
        "base_width": 8,
        "depth": 2,
    }
    model.update(model_over)
    return {
        "run_name": run_name,
        "mode": mode,
        "seed": seed,
        "epochs": epochs,
        "dataset": {
            "name": "synthetic",
            "root": str(root),
            "ratios": [0.5, 0.25, 0.25],
        },
        "model": model,
        "augmentation": {"p_contrast": 0, "p_affine": 0, "p_elastic": 0, "p_noise": 0},
    }

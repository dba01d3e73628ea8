# Experiment integrator settings. epsilon is coarser than the library default
# so the step guard leaves Monte Carlo sweeps at a desk-scale cost.
default_integrator = {
    "epsilon": 1e-2,
    "step": 1e-2,
    "tol": 1e-6,
    "window": 1.0,
    "horizon": 500.0,
    "sample_every": 0.1,
}

default_network = {
    "n": 32,
    "p": 0.25,
    "q": 0.125,
    "normalization": "row-normalized",
    "a": 1.0,
}

default_graph = {
    "edges": None,
    "labels": None,
    "normalization": "row-normalized",
    "a": 1.0,
}

default_run = {
    "seed": 0,
    "workers": 1,
    "chunk_size": 64,
    "extremism_norm": "l1",
}

default_experiments = {
    "polarization": {
        "trials": 1000,
        "b_grid": [0.25, 0.5, 1.0, 2.0, 4.0, 8.0, 16.0, 32.0],
        "h_grid": [2.0],
    },
    "monotonicity": {
        "trials": 200,
        "b": 1.0,
        "h_grid": [0.5, 1.0, 2.0, 3.0],
        "horizon": 30.0,
    },
    "consensus-prob": {
        "trials": 10000,
        "b": 0.05,
        "h_grid": [0.1, 0.5, 1.0, 1.5, 2.0, 2.5, 3.0],
    },
    "extremism": {
        "trials": 1000,
        "b_grid": [0.01, 0.05, 0.1, 0.5, 1.0, 5.0, 10.0],
        "h_grid": [2.0],
    },
    "cycle-demo": {
        "trials": 1,
        "b": 0.6,
        "epsilon": 0.1,
        "horizon": 200.0,
        "x0": [-0.5, 1.0, 0.5, -1.0],
    },
}

from typing import Mapping
import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import pandas as pd  # noqa: E402
import os  # noqa: E402


def plot_wasserstein(logs: Mapping[str, pd.DataFrame], path: str, title: str = "Wasserstein estimate") -> str:
    """
    Plot Wasserstein estimates of several runs against the iteration.

    Args:
        logs (Mapping[str, pd.DataFrame]): Run name -> RunLog frame with
            "iteration" and "wasserstein" columns.
        path (str): Output image path.
        title (str): Figure title.

    Returns:
        str: The written path.
    """
    fig, ax = plt.subplots(figsize=(6, 4))
    for name, frame in logs.items():
        ax.plot(frame["iteration"], frame["wasserstein"], label=name, linewidth=1.0)
    ax.set_xlabel("iteration")
    ax.set_ylabel("mean real score - mean fake score")
    ax.set_title(title)
    ax.legend()
    fig.tight_layout()
    directory = os.path.dirname(path)
    if directory:
        os.makedirs(directory, exist_ok=True)
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path

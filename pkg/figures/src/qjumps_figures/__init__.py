"""Render the stock figures from simulation result bundles.

Consumes only the delimited bundle files. Each output PNG carries a sha256
digest of the exact input bytes in its text metadata ("input_sha256"), so
any figure can be traced back to the data it was drawn from.
"""

from pathlib import Path

from matplotlib.figure import Figure

from .io import check_inputs
from .recipes import FIGURES, FigureRecipe

__version__ = "0.1.0"

__all__ = ["FIGURES", "FigureRecipe", "render", "__version__"]


def render(figure: str, bundle, out, dpi: int = 150) -> str:
    """Draw one stock figure from a bundle directory into a PNG file.

    Returns the sha256 hex digest of the consumed inputs; the same value is
    stored in the PNG text metadata under "input_sha256".
    """
    if figure not in FIGURES:
        raise ValueError(f"unknown figure {figure!r}; known: {sorted(FIGURES)}")
    recipe = FIGURES[figure]
    data, digest = check_inputs(bundle, recipe.requires)
    fig = Figure(figsize=recipe.figsize, layout="constrained")
    recipe.draw(fig, data)
    out = Path(out)
    if out.parent != Path(""):
        out.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(out, format="png", dpi=dpi,
                metadata={"input_sha256": digest, "figure": figure})
    return digest

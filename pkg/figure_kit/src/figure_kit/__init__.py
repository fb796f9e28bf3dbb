"""Turn simulation CSV outputs into publication-style figures."""

__version__ = "0.1.0"

from .render import KINDS, RecipeError, load_recipe, render_figure

__all__ = ["KINDS", "RecipeError", "load_recipe", "render_figure"]

from pathlib import Path

from jinja2 import Environment, FileSystemLoader, StrictUndefined, meta

from quasiperiod import consts

template_dir = Path(__file__).resolve().parent.parent / "templates"

env = Environment(
    loader=FileSystemLoader(template_dir), undefined=StrictUndefined, trim_blocks=True, lstrip_blocks=True
)
env.filters["num"] = lambda value, digits=12: f"{value:.{digits}g}" if isinstance(value, (int, float)) else value


def check_for_consts(template_name: str, context: dict) -> dict:
    """Check if any of the template vars are in consts.py."""
    vars = meta.find_undeclared_variables(env.parse(env.loader.get_source(env, template_name)[0]))
    for var in vars:
        if var not in context and hasattr(consts, var):
            context[var] = getattr(consts, var)
    return context


def render_template(template_name: str, context: dict | None = None) -> str:
    """Load a template from the environment and format it."""
    context = check_for_consts(template_name, dict(context or {}))
    template = env.get_template(template_name)
    return template.render(context)

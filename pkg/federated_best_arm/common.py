from pathlib import Path
from typing import Any, Dict, Sequence, Union

import pydantic
from ruyaml import YAML
from typing_extensions import TypeGuard

yaml = YAML(typ="safe")

FloatMatrix = Sequence[Sequence[float]]
"""K×M matrix indexed [arm][client]"""

IntMatrix = Sequence[Sequence[int]]


class Node(
    pydantic.BaseModel,
    extra="ignore",
    frozen=True,
    populate_by_name=True,
    revalidate_instances="never",
    validate_assignment=True,
    validate_default=False,
):
    """"""  # avoid inheriting docstring from `pydantic.BaseModel`


def _is_str_dict(d: Any) -> TypeGuard[Dict[str, Any]]:
    return isinstance(d, dict) and all(
        isinstance(k, str) for k in d  # pyright: ignore[reportUnknownVariableType]
    )


def load_yaml_mapping(path: Union[str, Path]) -> Dict[str, Any]:
    """load a YAML file that has to hold a mapping at its top level"""
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(path)

    data: Any = yaml.load(path.read_text(encoding="utf-8"))
    if not _is_str_dict(data):
        raise ValueError(f"expected a mapping at the top level of {path}")

    return data

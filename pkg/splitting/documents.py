"""
JSON document schemas (pydantic) for schemes, problems and operator descriptors.
Parsing errors are converted to DocumentError with a location string.
"""

import json
from typing import Any, Dict, List, Literal, Optional, Type, TypeVar, Union

from pydantic import BaseModel, ConfigDict, Field, ValidationError

from .errors import DocumentError

Matrix = List[List[float]]
Vector = List[float]

ModelT = TypeVar('ModelT', bound=BaseModel)


class SchemeDocument(BaseModel):
    """{"n", "m", "gamma", "M", "N"} with row-major nested arrays"""
    model_config = ConfigDict(extra='ignore')

    n: int = Field(ge=1)
    m: int = Field(ge=0)
    gamma: Optional[float] = None
    M: Matrix
    N: Matrix
    name: Optional[str] = None


class AffineDescriptor(BaseModel):
    A: Matrix
    b: Optional[Vector] = None


class ProxDescriptor(BaseModel):
    kind: Literal['l1', 'squared_distance', 'box', 'affine_set']
    params: Dict[str, Any] = Field(default_factory=dict)


class SaddleDescriptor(BaseModel):
    P: Matrix
    C: Matrix
    Q: Matrix
    b: Optional[Vector] = None


class OperatorDocument(BaseModel):
    """Exactly one of affine / prox / saddle"""
    model_config = ConfigDict(extra='forbid')

    affine: Optional[AffineDescriptor] = None
    prox: Optional[ProxDescriptor] = None
    saddle: Optional[SaddleDescriptor] = None

    def which(self) -> str:
        present = [key for key in ('affine', 'prox', 'saddle') if getattr(self, key) is not None]
        if len(present) != 1:
            raise DocumentError(f"operator descriptor must have exactly one of affine/prox/saddle, got {present}")
        return present[0]


class ReferenceDocument(BaseModel):
    solution: Vector
    provenance: Literal['analytic', 'oracle'] = 'oracle'


class ProblemDocument(BaseModel):
    """{"dim", "operators": [descriptor...], "reference": optional}"""
    model_config = ConfigDict(extra='ignore')

    dim: int = Field(ge=1)
    operators: List[OperatorDocument]
    reference: Optional[Union[ReferenceDocument, Vector]] = None
    description: str = ""


def _location(error: Dict[str, Any]) -> str:
    return ".".join(str(part) for part in error.get('loc', ())) or "<root>"


def parse_document(text_or_data: Union[str, bytes, Dict[str, Any]], model: Type[ModelT]) -> ModelT:
    """
    Parse JSON text (or an already decoded mapping) into a document model.

    Args:
        text_or_data: JSON string/bytes or dict
        model: pydantic model class

    Returns:
        Validated model instance
    """
    if isinstance(text_or_data, (str, bytes)):
        try:
            data = json.loads(text_or_data)
        except json.JSONDecodeError as exc:
            raise DocumentError(f"invalid JSON: {exc.msg}",
                                location=f"line {exc.lineno} column {exc.colno}") from exc
    else:
        data = text_or_data
    try:
        return model.model_validate(data)
    except ValidationError as exc:
        first = exc.errors()[0]
        raise DocumentError(f"{model.__name__}: {first['msg']}", location=_location(first)) from exc


def dump_document(document: BaseModel) -> str:
    """Serialize with floats in shortest round-trip form"""
    return json.dumps(document.model_dump(exclude_none=True), indent=2) + "\n"

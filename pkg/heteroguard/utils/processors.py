"""
Processor Functions (processors.py) | Set of functions that processes a particular object / entity / elements, whatever you call it.

These functions varies from deriving random streams to reading and writing the tab-separated and JSON artifacts of a run.

This file is part of HeteroGuard.

HeteroGuard is free software: you can redistribute it and/or modify it under the terms of the GNU General Public License as published by the Free Software Foundation, either version 3 of the License, or (at your option) any later version.
HeteroGuard is distributed in the hope that it will be useful, but WITHOUT ANY WARRANTY; without even the implied warranty of MERCHANTABILITY or FITNESS FOR A PARTICULAR PURPOSE. See the GNU General Public License for more details.
You should have received a copy of the GNU General Public License along with HeteroGuard. If not, see <https://www.gnu.org/licenses/>.
"""

from hashlib import sha256
from io import StringIO
from logging import Logger, getLogger
from pathlib import Path
from typing import Any, Iterable, Sequence

import numpy as np
import pandas as pd
import torch
from orjson import OPT_INDENT_2, OPT_SERIALIZE_NUMPY
from orjson import dumps as export_to_json
from orjson import loads as import_from_json
from pandas.errors import EmptyDataError
from pydantic import BaseModel

from core.constants import LOGGER_NAME, TSV_COMMENT_CHAR, TSV_DELIMITER

logger: Logger = getLogger(LOGGER_NAME)

# # Random Streams — START


def hash_context(*, context: str) -> str:
    return sha256(context.encode("utf-8")).hexdigest()


def derive_seed(root: int, *, module: str, purpose: str, iteration: int = 0) -> int:
    """
    Derives an independent seed for the labelled counter (module, purpose, iteration) from a single root seed.

    The label is hashed into a spawn key of a `numpy.random.SeedSequence`, so two different labels never share a stream and the same label always returns the same seed.
    """
    label_digest: str = hash_context(context=f"{module}/{purpose}")
    spawn_key: tuple[int, ...] = (
        int(label_digest[:8], 16),
        int(label_digest[8:16], 16),
        iteration,
    )
    sequence = np.random.SeedSequence(entropy=root, spawn_key=spawn_key)
    return int(sequence.generate_state(1, dtype=np.uint64)[0] >> np.uint64(1))


def derive_generator(
    root: int, *, module: str, purpose: str, iteration: int = 0
) -> np.random.Generator:
    return np.random.default_rng(
        derive_seed(root, module=module, purpose=purpose, iteration=iteration)
    )


def derive_torch_generator(
    root: int, *, module: str, purpose: str, iteration: int = 0
) -> torch.Generator:
    generator = torch.Generator()
    generator.manual_seed(
        derive_seed(root, module=module, purpose=purpose, iteration=iteration)
    )
    return generator


# # Random Streams — END

# # File Handlers, Tab-Separated — START


def read_tsv(path: Path) -> list[list[str]]:
    """
    Reads a UTF-8, tab-delimited file with `#` comments into rows of strings. Empty files return no rows.
    """
    try:
        frame: pd.DataFrame = pd.read_csv(
            path,
            sep=TSV_DELIMITER,
            comment=TSV_COMMENT_CHAR,
            header=None,
            dtype=str,
            encoding="utf-8",
            keep_default_na=False,
            skip_blank_lines=True,
        )
    except EmptyDataError:
        return []

    return [
        [cell for cell in row if isinstance(cell, str) and cell != ""]
        for row in frame.values.tolist()
    ]


def write_tsv(
    path: Path,
    rows: Iterable[Sequence[Any]],
    *,
    header_comment: str | None = None,
    columns: Sequence[str] | None = None,
) -> None:
    resolved_rows: list[Sequence[Any]] = list(rows)
    buffer = StringIO()

    if header_comment is not None:
        buffer.write(f"{TSV_COMMENT_CHAR} {header_comment}\n")

    # ! An empty frame without columns is written as a quoted empty cell.
    if not resolved_rows and not columns:
        path.write_text(buffer.getvalue(), encoding="utf-8")
        return

    frame = pd.DataFrame(resolved_rows, columns=list(columns) if columns else None)
    frame.to_csv(
        buffer,
        sep=TSV_DELIMITER,
        index=False,
        header=columns is not None,
        float_format="%.17g",
        lineterminator="\n",
    )
    path.write_text(buffer.getvalue(), encoding="utf-8")


# # File Handlers, Tab-Separated — END

# # File Handlers, JSON — START


def write_json(path: Path, context: BaseModel | dict[str, Any] | list[Any]) -> None:
    payload = context.dict() if isinstance(context, BaseModel) else context
    path.write_bytes(
        export_to_json(
            payload,
            default=_fallback_serializer,
            option=OPT_INDENT_2 | OPT_SERIALIZE_NUMPY,
        )
    )


def write_jsonl(path: Path, records: Iterable[BaseModel | dict[str, Any]]) -> None:
    with path.open("wb") as content_buffer:
        for each_record in records:
            payload = (
                each_record.dict() if isinstance(each_record, BaseModel) else each_record
            )
            content_buffer.write(
                export_to_json(
                    payload,
                    default=_fallback_serializer,
                    option=OPT_SERIALIZE_NUMPY,
                )
            )
            content_buffer.write(b"\n")


def _fallback_serializer(o: Any) -> Any:
    # * Enums and paths nested in pydantic dictionaries.
    if hasattr(o, "value"):
        return o.value

    if isinstance(o, Path):
        return str(o)

    raise TypeError(f"Type {type(o)} is not serializable.")


def as_plain_data(context: BaseModel | dict[str, Any] | list[Any]) -> Any:
    """
    Reduces a model or a container to JSON-compatible builtins, for payloads that are not written as JSON themselves.
    """
    payload = context.dict() if isinstance(context, BaseModel) else context
    return import_from_json(
        export_to_json(payload, default=_fallback_serializer, option=OPT_SERIALIZE_NUMPY)
    )


# # File Handlers, JSON — END

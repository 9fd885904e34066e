class FacedynError(Exception):
    """Base error; `exit_code` is what the CLI returns when this escapes a command."""

    exit_code = 1

    def __init__(self, detail: str):
        super().__init__(detail)
        self.detail = detail


class ConfigError(FacedynError):
    exit_code = 2


class ArgumentError(FacedynError, ValueError):
    exit_code = 2


class DataError(FacedynError):
    exit_code = 3


class SchemaError(DataError):
    def __init__(self, column: str, source: str = "AU CSV"):
        super().__init__(f"{source} is missing required column '{column}'")
        self.column = column


class CsvParseError(DataError):
    def __init__(self, row: int, column: str, value: str):
        super().__init__(f"Non-numeric value {value!r} in column '{column}' at row {row}")
        self.row = row
        self.column = column


class PairingError(DataError):
    def __init__(self, pair_ids: list[str]):
        super().__init__(f"Unpaired videos for pair_id(s): {', '.join(pair_ids)}")
        self.pair_ids = pair_ids


class LabelError(DataError):
    def __init__(self, label: str, video_id: str):
        super().__init__(f"Invalid label {label!r} for video '{video_id}' (expected 'real' or 'fake')")
        self.label = label


class FeatureMismatchError(DataError):
    def __init__(self, missing: list[str], unexpected: list[str]):
        parts = []
        if missing:
            parts.append(f"missing columns: {', '.join(missing)}")
        if unexpected:
            parts.append(f"unexpected columns: {', '.join(unexpected)}")
        super().__init__("Feature mismatch with trained model; " + "; ".join(parts))
        self.missing = missing
        self.unexpected = unexpected

"""Exception types shared across the toolkit."""


class PromptsegError(Exception):
    """Base class for all toolkit errors."""

    tag = "internal"


class MaskShapeError(PromptsegError):
    """Masks or images with incompatible or invalid dimensions."""

    tag = "data"


class PromptError(PromptsegError):
    """Invalid prompt geometry or unknown strategy."""

    tag = "prompt"


class DatasetError(PromptsegError):
    """Manifest, pairing, or frame-sequence loading failures."""

    tag = "dataset"


class ProtocolError(PromptsegError):
    """Malformed or out-of-contract wire messages."""

    tag = "protocol"


class BackendError(PromptsegError):
    """Backend transport failures or server-reported errors."""

    tag = "backend"

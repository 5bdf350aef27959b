class ExporterError(Exception):
    """Base class for exporter failures."""


class MissingImage(ExporterError):
    """Crop plan and image folder disagree about which images exist."""


class ModelLoadFailure(ExporterError):
    """Requested backbone is unknown or its weights cannot be loaded."""


class BadDescriptorFile(ExporterError):
    """Descriptor JSON is malformed or missing a required class."""

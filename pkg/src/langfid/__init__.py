"""Language-fidelity evaluation and checkpoint post-processing for multilingual VLMs."""

__version__ = "0.1.0"

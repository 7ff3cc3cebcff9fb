"""neurobulb: EEG performance metrics steering a Mandelbulb-variant
renderer and a 16-voice FM synthesizer, headless and deterministic."""

__version__ = "0.1.0"

# SPDX-License-Identifier: Apache-2.0
"""visual-text to speech: render text as glyph images, extract visual
features with a small CNN, and synthesize mel spectrograms with a
non-autoregressive acoustic model."""

try:  # installed wheel: extension lives inside the package
    from . import _vtts as _impl
except ImportError:  # development tree: extension on PYTHONPATH
    import _vtts as _impl

VttsConfigError = _impl.VttsConfigError
VttsInputError = _impl.VttsInputError
VttsIoError = _impl.VttsIoError

cer = _impl.cer
classify_sentence = _impl.classify_sentence
fit = _impl.fit
griffin_lim = _impl.griffin_lim
make_corpus = _impl.make_corpus
read_tensor = _impl.read_tensor
render = _impl.render
slice_image = _impl.slice_image
synthesize = _impl.synthesize
synthetic_glyph = _impl.synthetic_glyph
write_tensor = _impl.write_tensor
write_wav = _impl.write_wav
__version__ = _impl.__version__

__all__ = [
    "VttsConfigError",
    "VttsInputError",
    "VttsIoError",
    "cer",
    "classify_sentence",
    "fit",
    "griffin_lim",
    "make_corpus",
    "read_tensor",
    "render",
    "slice_image",
    "synthesize",
    "synthetic_glyph",
    "write_tensor",
    "write_wav",
    "__version__",
]

"""Hybrid clickbait scorer: BiLSTM with attention over post titles plus
Siamese text/image similarity branches, trained with adadelta on a scratch
reverse-mode autodiff engine."""

__version__ = "0.1.0"

"""seqlab: multi-task BLSTM-CNN-CRF sequence labeling toolkit."""

__version__ = "0.1.0"

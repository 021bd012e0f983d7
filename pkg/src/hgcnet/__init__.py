"""hgcnet: hierarchical group convolution engine, HGCNet builder and trainer."""

__version__ = "0.1.0"

# vexpert video module

from .compress import CompressTrace, Gop, GopTrace, compress, compress_gops, partition_gops
from .frontend import encode_synthetic, load_features, resample_uniform, save_features

__all__ = [
    "CompressTrace",
    "Gop",
    "GopTrace",
    "compress",
    "compress_gops",
    "partition_gops",
    "encode_synthetic",
    "load_features",
    "resample_uniform",
    "save_features",
]

"""Binarize captured Gray-code frames and decode the fringe-order map."""

from dataclasses import dataclass

import numpy as np

from ._validation import check_mask, check_raster, check_same_shape
from .patterns import build_codeword_table

__all__ = ["OrderMap", "binarize", "decode_V", "order_map", "decode_orders"]


@dataclass(frozen=True)
class OrderMap:
    """Per-pixel 1-based fringe order.

    ``k`` holds 0 wherever ``valid`` is False. ``out_of_table`` counts valid
    input pixels whose decoded value had no table entry.
    """

    k: np.ndarray
    valid: np.ndarray
    n_bits: int
    out_of_table: int = 0

    @property
    def shape(self):
        return self.k.shape


def binarize(gray_frame, A, valid):
    """Bit 1 where ``gray_frame > A`` (strict); invalid pixels get 0."""
    gray_frame = check_raster(gray_frame, "gray_frame")
    A = check_raster(A, "A")
    valid = check_mask(valid, gray_frame.shape, "valid")
    check_same_shape(gray_frame, A, names=("gray_frame", "A"))
    with np.errstate(invalid="ignore"):
        return ((gray_frame > A) & valid).astype(np.uint8)


def decode_V(bits):
    """Decoded decimal value ``sum(GC_i * 2**(N - i))`` from MSB-first bit grids."""
    if len(bits) == 0:
        raise ValueError("need at least one bit grid")
    check_same_shape(*bits)
    V = np.zeros(np.shape(bits[0]), dtype=np.int64)
    for b in bits:
        V = (V << 1) | (np.asarray(b, dtype=np.int64) & 1)
    return V


def order_map(V, table, valid):
    V = np.asarray(V, dtype=np.int64)
    valid = check_mask(valid, V.shape, "valid")
    inside = (V >= 0) & (V < len(table))
    out = int((valid & ~inside).sum())
    ok = valid & inside
    k = np.where(ok, table.lookup(V), 0)
    return OrderMap(k=k, valid=ok, n_bits=table.n_bits, out_of_table=out)


def decode_orders(gray_frames, A, valid, table=None):
    """Binarize every Gray frame against `A` and decode the order map."""
    if table is None:
        table = build_codeword_table(len(gray_frames))
    bits = [binarize(g, A, valid) for g in gray_frames]
    return order_map(decode_V(bits), table, valid)

"""Build the 5k-image MNIST subset used by the desk-scale experiments.

The images come from the ``mnist_5k.csv.gz`` file shipped inside the mlxtend
wheel (BSD-3, a 5000-sample slice of the original MNIST). They are rewritten as
gzipped IDX files so the experiments read them through ``genlab.datagen.load_idx``.

    python scripts/fetch_mnist_subset.py [--out data]
"""

import argparse
import gzip
import io
import struct
import subprocess
import sys
import tempfile
import zipfile
from pathlib import Path

import numpy as np

CSV_MEMBER = "mlxtend/data/data/mnist_5k.csv.gz"


def _wheel_bytes() -> bytes:
    try:
        import mlxtend.data  # noqa: F401

        path = Path(mlxtend.data.__file__).parent / "data" / "mnist_5k.csv.gz"
        return path.read_bytes()
    except ImportError:
        pass
    with tempfile.TemporaryDirectory() as tmp:
        subprocess.run(
            [sys.executable, "-m", "pip", "download", "mlxtend", "--no-deps", "-d", tmp, "-q"],
            check=True,
        )
        wheel = next(Path(tmp).glob("mlxtend-*.whl"))
        with zipfile.ZipFile(wheel) as zf:
            return zf.read(CSV_MEMBER)


def write_idx(out: Path, images: np.ndarray, labels: np.ndarray) -> None:
    n, rows, cols = images.shape
    with gzip.GzipFile(out / "mnist5k-images-idx3-ubyte.gz", "wb", mtime=0) as fh:
        fh.write(struct.pack(">IIII", 0x00000803, n, rows, cols))
        fh.write(images.astype(np.uint8).tobytes())
    with gzip.GzipFile(out / "mnist5k-labels-idx1-ubyte.gz", "wb", mtime=0) as fh:
        fh.write(struct.pack(">II", 0x00000801, n))
        fh.write(labels.astype(np.uint8).tobytes())


def main() -> None:
    ap = argparse.ArgumentParser()
    ap.add_argument("--out", default=str(Path(__file__).resolve().parents[1] / "data"))
    args = ap.parse_args()
    raw = gzip.decompress(_wheel_bytes())
    table = np.loadtxt(io.BytesIO(raw), delimiter=",", dtype=np.int64)
    images = table[:, :-1].reshape(-1, 28, 28)
    labels = table[:, -1]
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_idx(out, images, labels)
    print(f"wrote {len(labels)} images to {out}")


if __name__ == "__main__":
    main()

"""RBF-embedded residual network with batch normalization, plus ensembles
and a flat binary checkpoint format."""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .copula import A2Params, init_bias, init_weights
from .errors import DegenerateInputError, DomainError, ShapeError
from .field import make_grid
from .stats import RngStream

INIT_STREAM = 21


@dataclass
class EmbeddingConfig:
    centers: np.ndarray  # (K, 2)
    tau: float = 0.3

    def __post_init__(self):
        self.centers = np.asarray(self.centers, dtype=np.float64).reshape(-1, 2)
        if self.centers.shape[0] < 1:
            raise DomainError("need at least one RBF center")
        if not self.tau > 0:
            raise DomainError("tau must be positive")

    @classmethod
    def regular(cls, per_side: int = 8, tau: float = 0.3) -> "EmbeddingConfig":
        return cls(make_grid(per_side).coords.copy(), tau)

    @property
    def K(self) -> int:
        return self.centers.shape[0]


def embed(x, cfg: EmbeddingConfig) -> np.ndarray:
    """phi(x)_k = exp(-|x - c_k|^2 / tau^2); returns (batch, K)."""
    x = np.asarray(x, dtype=np.float64).reshape(-1, 2)
    d2 = ((x[:, None, :] - cfg.centers[None, :, :]) ** 2).sum(axis=-1)
    return np.exp(-d2 / cfg.tau**2)


@dataclass
class BatchNorm:
    gamma: ad.Tensor
    beta: ad.Tensor
    running_mean: np.ndarray
    running_var: np.ndarray
    momentum: float = 0.1
    eps: float = 1e-5

    @classmethod
    def create(cls, width: int, momentum: float = 0.1, eps: float = 1e-5) -> "BatchNorm":
        return cls(ad.tensor(np.ones(width), True), ad.tensor(np.zeros(width), True),
                   np.zeros(width), np.ones(width), momentum, eps)

    def __call__(self, x: ad.Tensor, train: bool) -> ad.Tensor:
        if train:
            n = x.shape[0]
            if n < 2:
                raise DegenerateInputError("train-mode batch norm needs a batch of at least 2")
            mu = ad.mean(x, axis=0)
            xc = x - mu
            var = ad.mean(ad.square(xc), axis=0)
            xhat = xc / ad.sqrt(var + self.eps)
            m = self.momentum
            self.running_mean = (1 - m) * self.running_mean + m * mu.data
            self.running_var = (1 - m) * self.running_var + m * var.data * n / (n - 1)
        else:
            xhat = (x - self.running_mean) / np.sqrt(self.running_var + self.eps)
        return xhat * self.gamma + self.beta


@dataclass
class ModelParams:
    W1: ad.Tensor
    b1: ad.Tensor
    W2: ad.Tensor
    b2: ad.Tensor
    W3: ad.Tensor
    b3: ad.Tensor
    W_out: ad.Tensor
    b_out: ad.Tensor
    bn1: BatchNorm
    bn2: BatchNorm
    bn3: BatchNorm
    embedding: EmbeddingConfig
    elu_alpha: float = 1.0

    def __post_init__(self):
        d1, k = self.W1.shape
        if k != self.embedding.K:
            raise ShapeError(f"W1 expects {k} inputs but embedding has {self.embedding.K}")
        if self.W2.shape != (d1, d1) or self.W3.shape != (d1, d1):
            raise ShapeError("W2 and W3 must be square with the hidden width")
        if self.W_out.shape != (1, d1 + k):
            raise ShapeError(f"W_out must be (1, {d1 + k}), got {self.W_out.shape}")

    @property
    def width(self) -> int:
        return self.W1.shape[0]

    def parameters(self) -> list:
        return [self.W1, self.b1, self.bn1.gamma, self.bn1.beta,
                self.W2, self.b2, self.bn2.gamma, self.bn2.beta,
                self.W3, self.b3, self.bn3.gamma, self.bn3.beta,
                self.W_out, self.b_out]

    def batchnorms(self) -> list:
        return [self.bn1, self.bn2, self.bn3]

    def copy(self) -> "ModelParams":
        return _from_arrays(self.state_arrays(), self.embedding, self.elu_alpha)

    def state_arrays(self) -> dict:
        """Layer-ordered name -> array mapping, including running statistics."""
        out = {}
        for i, (W, b, bn) in enumerate(((self.W1, self.b1, self.bn1), (self.W2, self.b2, self.bn2),
                                        (self.W3, self.b3, self.bn3)), start=1):
            out[f"W{i}"] = W.data
            out[f"b{i}"] = b.data
            out[f"bn{i}.gamma"] = bn.gamma.data
            out[f"bn{i}.beta"] = bn.beta.data
            out[f"bn{i}.running_mean"] = bn.running_mean
            out[f"bn{i}.running_var"] = bn.running_var
        out["W_out"] = self.W_out.data
        out["b_out"] = self.b_out.data
        out["embedding.centers"] = self.embedding.centers
        out["embedding.tau"] = np.array([self.embedding.tau])
        return {k: np.array(v, dtype=np.float64) for k, v in out.items()}


def _from_arrays(arrs: dict, embedding: EmbeddingConfig | None = None, elu_alpha: float = 1.0):
    if embedding is None:
        embedding = EmbeddingConfig(arrs["embedding.centers"], float(arrs["embedding.tau"][0]))
    bns = []
    for i in (1, 2, 3):
        bns.append(BatchNorm(ad.tensor(arrs[f"bn{i}.gamma"].copy(), True),
                             ad.tensor(arrs[f"bn{i}.beta"].copy(), True),
                             arrs[f"bn{i}.running_mean"].copy(), arrs[f"bn{i}.running_var"].copy()))
    p = lambda k: ad.tensor(arrs[k].copy(), True)
    return ModelParams(p("W1"), p("b1"), p("W2"), p("b2"), p("W3"), p("b3"),
                       p("W_out"), p("b_out"), *bns, embedding=embedding, elu_alpha=elu_alpha)


def init_model(theta: float, seed: int, embedding: EmbeddingConfig | None = None,
               width: int = 64, rng: RngStream | None = None) -> ModelParams:
    """Fresh network with every fully connected layer drawn by the copula initializer."""
    embedding = embedding or EmbeddingConfig.regular()
    rng = rng or RngStream(seed, INIT_STREAM)
    a2 = A2Params(theta)
    k = embedding.K
    w = lambda fo, fi: ad.tensor(init_weights(rng, (fo, fi), a2), True)
    b = lambda fo: ad.tensor(init_bias(fo), True)
    return ModelParams(
        w(width, k), b(width), w(width, width), b(width), w(width, width), b(width),
        w(1, width + k), b(1),
        BatchNorm.create(width), BatchNorm.create(width), BatchNorm.create(width),
        embedding=embedding,
    )


def forward_features(phi: np.ndarray, params: ModelParams, train: bool) -> ad.Tensor:
    """Network output (batch, 1) given a precomputed embedding ``phi``."""
    a = params.elu_alpha
    phi_t = ad.tensor(phi)
    h1 = ad.elu(params.bn1(phi_t @ params.W1.T + params.b1, train), a)
    h2 = ad.elu(params.bn2(h1 @ params.W2.T + params.b2, train), a) + h1
    h3 = ad.elu(params.bn3(h2 @ params.W3.T + params.b3, train), a)
    return ad.concat([h3, phi_t], axis=1) @ params.W_out.T + params.b_out


def forward(x, params: ModelParams, mode: str = "eval") -> ad.Tensor:
    if mode not in ("train", "eval"):
        raise DomainError(f"mode must be 'train' or 'eval', got {mode!r}")
    return forward_features(embed(x, params.embedding), params, mode == "train")


def predict(x, params: ModelParams) -> np.ndarray:
    """Eval-mode predictions as a flat array."""
    with ad.no_grad():
        return forward(x, params, "eval").data.ravel()


def predict_ensemble(x, replicas) -> tuple[np.ndarray, np.ndarray]:
    """Per-point mean and population standard deviation across replicas."""
    replicas = list(replicas)
    if len(replicas) < 2:
        raise DomainError("an ensemble needs at least 2 replicas")
    preds = np.stack([predict(x, r) for r in replicas])
    # deviations from the first replica: exact zeros when replicas agree
    d = preds - preds[0]
    return preds[0] + d.mean(axis=0), d.std(axis=0)


# Checkpoint layout (little-endian):
#   magic b"A2SBNN01", uint32 entry count, then per entry:
#   uint16 name length, utf-8 name, uint8 ndim, ndim x uint32 dims, float64 values (C order).
_MAGIC = b"A2SBNN01"


def save_checkpoint(path, params: ModelParams) -> None:
    arrs = params.state_arrays()
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack("<I", len(arrs)))
        for name, arr in arrs.items():
            nb = name.encode("utf-8")
            fh.write(struct.pack("<H", len(nb)))
            fh.write(nb)
            fh.write(struct.pack("<B", arr.ndim))
            fh.write(struct.pack(f"<{arr.ndim}I", *arr.shape))
            fh.write(np.ascontiguousarray(arr, dtype="<f8").tobytes())


def load_checkpoint(path) -> ModelParams:
    with open(path, "rb") as fh:
        buf = fh.read()
    if buf[:8] != _MAGIC:
        raise ValueError(f"{path}: not an A2SBNN checkpoint")
    (count,) = struct.unpack_from("<I", buf, 8)
    pos = 12
    arrs = {}
    for _ in range(count):
        (ln,) = struct.unpack_from("<H", buf, pos)
        pos += 2
        name = buf[pos:pos + ln].decode("utf-8")
        pos += ln
        (ndim,) = struct.unpack_from("<B", buf, pos)
        pos += 1
        shape = struct.unpack_from(f"<{ndim}I", buf, pos)
        pos += 4 * ndim
        n = int(np.prod(shape)) if ndim else 1
        arrs[name] = np.frombuffer(buf, dtype="<f8", count=n, offset=pos).reshape(shape).astype(np.float64)
        pos += 8 * n
    return _from_arrays(arrs)

"""The two fixture architectures, both biasless with ReLU between layers."""

import torch
from torch import nn


class Fnn3(nn.Module):
    """784 -> 256 -> 256 -> 10 affine stack."""

    def __init__(self):
        super().__init__()
        self.h1 = nn.Linear(784, 256, bias=False)
        self.h2 = nn.Linear(256, 256, bias=False)
        self.h3 = nn.Linear(256, 10, bias=False)

    def forward(self, x):
        x = torch.relu(self.h1(x))
        x = torch.relu(self.h2(x))
        return self.h3(x)

    def export_layers(self):
        return [
            {"kind": "affine", "W": self.h1.weight.detach().numpy()},
            {"kind": "affine", "W": self.h2.weight.detach().numpy()},
            {"kind": "affine", "W": self.h3.weight.detach().numpy()},
        ]


class Block(nn.Module):
    """x + W2 relu(W1 x), width 256."""

    def __init__(self, k=256):
        super().__init__()
        self.w1 = nn.Linear(k, k, bias=False)
        self.w2 = nn.Linear(k, k, bias=False)

    def forward(self, x):
        return self.w2(torch.relu(self.w1(x))) + x


class Residual2(nn.Module):
    """784 -> 256 head, two residual blocks, 256 -> 10 tail."""

    def __init__(self):
        super().__init__()
        self.h1 = nn.Linear(784, 256, bias=False)
        self.z1 = Block()
        self.z2 = Block()
        self.h2 = nn.Linear(256, 10, bias=False)

    def forward(self, x):
        x = torch.relu(self.h1(x))
        x = torch.relu(self.z1(x))
        x = torch.relu(self.z2(x))
        return self.h2(x)

    def export_layers(self):
        return [
            {"kind": "affine", "W": self.h1.weight.detach().numpy()},
            {
                "kind": "residual",
                "W1": self.z1.w1.weight.detach().numpy(),
                "W2": self.z1.w2.weight.detach().numpy(),
            },
            {
                "kind": "residual",
                "W1": self.z2.w1.weight.detach().numpy(),
                "W2": self.z2.w2.weight.detach().numpy(),
            },
            {"kind": "affine", "W": self.h2.weight.detach().numpy()},
        ]


ARCHITECTURES = {"fnn3": Fnn3, "residual2": Residual2}

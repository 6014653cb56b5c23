"""Exports a small torch MLP as a spec/blob pair plus recorded outputs."""
import json
import pathlib
import sys

import numpy as np
import torch

out = pathlib.Path(sys.argv[1] if len(sys.argv) > 1 else "tests/fixtures")
out.mkdir(parents=True, exist_ok=True)

torch.manual_seed(1234)
model = torch.nn.Sequential(
    torch.nn.Linear(4, 8),
    torch.nn.Tanh(),
    torch.nn.Linear(8, 2),
).double()

spec = {
    "input_dim": 4,
    "layers": [
        {"name": "hidden", "kind": "dense", "in": 4, "out": 8, "activation": "identity"},
        {"name": "squash", "kind": "activation", "in": 8, "out": 8, "activation": "tanh"},
        {"name": "head", "kind": "dense", "in": 8, "out": 2, "activation": "identity"},
    ],
}

params = []
for layer in (model[0], model[2]):
    params.append(layer.weight.detach().numpy().reshape(-1))  # row-major out x in
    params.append(layer.bias.detach().numpy())
blob = np.concatenate(params).astype("<f8")

inputs = torch.rand(16, 4, dtype=torch.float64) * 2 - 1
with torch.no_grad():
    outputs = model(inputs)

(out / "mlp_spec.json").write_text(json.dumps(spec, indent=2) + "\n")
blob.tofile(out / "mlp_params.bin")
(out / "mlp_outputs.json").write_text(
    json.dumps({"inputs": inputs.tolist(), "outputs": outputs.tolist()}, indent=1) + "\n"
)

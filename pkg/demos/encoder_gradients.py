"""
Prompt gradients through a frozen encoder
=========================================

Builds the tiny transformer encoder, prepends a prompt to a sample's
tokens and checks the reverse-mode prompt gradient against central
finite differences.
"""

import numpy as np

from f2ocl import EncoderConfig, build_encoder, encode_query, encode_with_prompt, grad_wrt_prompt

# a small encoder: 8 input features cut into 4 tokens of width 8
enc = build_encoder(EncoderConfig(input_dim=8, token_dim=8, num_content_tokens=4, num_heads=2, num_blocks=2, seed=0))

gen = np.random.default_rng(0)
x = gen.standard_normal(8)
prompt = gen.standard_normal((3, 8))

# the query embedding ignores prompts; the augmented one mean-pools prompt and content tokens
q = encode_query(enc, x)
z = encode_with_prompt(enc, x, prompt)
print("query    ", np.round(q, 3))
print("augmented", np.round(z, 3))

# pull back a random upstream gradient to the prompt tokens
upstream = gen.standard_normal(8)
analytic = grad_wrt_prompt(enc, x, prompt, upstream)

h = 1e-5
numeric = np.zeros_like(prompt)
for idx in np.ndindex(prompt.shape):
    e = np.zeros_like(prompt)
    e[idx] = h
    numeric[idx] = (upstream @ encode_with_prompt(enc, x, prompt + e) - upstream @ encode_with_prompt(enc, x, prompt - e)) / (2 * h)

err = np.linalg.norm(analytic - numeric) / np.linalg.norm(numeric)
print(f"relative error vs finite differences: {err:.2e}")

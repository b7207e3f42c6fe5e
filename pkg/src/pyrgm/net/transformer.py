"""
The encoder-decoder transformer producing the embeddings of the edge generator.

The encoder applies self-attention then a feed-forward layer to each cloud, with residual connections.
The decoder applies co-attention: the queries of one cloud attend to the keys and values of the other,
for both clouds at once, followed by a feed-forward layer. Both clouds share every weight.
"""

from typing import Dict, Mapping, Tuple

import numpy as np

from pyrgm.diff import ops
from pyrgm.diff.tensor import Tensor
from pyrgm.errors import ParameterError
from pyrgm.net.layers import Shape, linear, linear_relu, linear_shapes

PROJECTIONS = ("query", "key", "value", "out")


def attention_shapes(prefix: str, width: int) -> Dict[str, Shape]:
    """
    Return the parameter shapes of a multi-head attention layer.

    Arguments:
        prefix: The layer name.
        width: The model width.

    Returns:
        Shapes by parameter name.
    """
    shapes: Dict[str, Shape] = {}
    for projection in PROJECTIONS:
        shapes.update(linear_shapes(f"{prefix}.{projection}", width, width))
    return shapes


def feed_forward_shapes(prefix: str, width: int, hidden: int) -> Dict[str, Shape]:
    """
    Return the parameter shapes of a feed-forward layer.

    Arguments:
        prefix: The layer name.
        width: The model width.
        hidden: The hidden width.

    Returns:
        Shapes by parameter name.
    """
    return {**linear_shapes(f"{prefix}.hidden", width, hidden), **linear_shapes(f"{prefix}.out", hidden, width)}


def transformer_shapes(prefix: str, width: int, layers: int, ffn_width: int) -> Dict[str, Shape]:
    """
    Return the parameter shapes of the stacked encoder-decoder layers.

    Arguments:
        prefix: The transformer name.
        width: The model width.
        layers: The number of encoder-decoder layers.
        ffn_width: The feed-forward hidden width; zero means `width`.

    Returns:
        Shapes by parameter name.
    """
    hidden = ffn_width or width
    shapes: Dict[str, Shape] = {}
    for layer in range(layers):
        base = f"{prefix}.layer{layer}"
        shapes.update(attention_shapes(f"{base}.self_attn", width))
        shapes.update(feed_forward_shapes(f"{base}.self_ffn", width, hidden))
        shapes.update(attention_shapes(f"{base}.cross_attn", width))
        shapes.update(feed_forward_shapes(f"{base}.cross_ffn", width, hidden))
    return shapes


def multi_head_attention(
    queries: Tensor,
    context: Tensor,
    params: Mapping[str, Tensor],
    prefix: str,
    heads: int,
) -> Tensor:
    """
    Scaled dot-product attention split over heads.

    Arguments:
        queries: The `(n, width)` features producing the queries.
        context: The `(m, width)` features producing the keys and values.
        params: The parameters.
        prefix: The layer name.
        heads: The number of heads, dividing `width`.

    Returns:
        The `(n, width)` attended features.
    """
    query = linear(queries, params, f"{prefix}.query")
    key = linear(context, params, f"{prefix}.key")
    value = linear(context, params, f"{prefix}.value")
    head_width = query.shape[1] // heads
    scale = 1.0 / np.sqrt(head_width)

    outputs = []
    for head in range(heads):
        columns = (slice(None), slice(head * head_width, (head + 1) * head_width))
        scores = ops.mul(ops.matmul(query[columns], ops.transpose(key[columns])), scale)
        outputs.append(ops.matmul(ops.softmax(scores), value[columns]))
    return linear(ops.concat(outputs, axis=1), params, f"{prefix}.out")


def feed_forward(inputs: Tensor, params: Mapping[str, Tensor], prefix: str) -> Tensor:
    """
    Apply the two-layer feed-forward network.

    Arguments:
        inputs: The `(n, width)` features.
        params: The parameters.
        prefix: The layer name.

    Returns:
        The `(n, width)` output.
    """
    return linear(linear_relu(inputs, params, f"{prefix}.hidden"), params, f"{prefix}.out")


def transformer_embed(
    features_x: Tensor,
    features_y: Tensor,
    params: Mapping[str, Tensor],
    prefix: str,
    heads: int,
    layers: int,
) -> Tuple[Tensor, Tensor]:
    """
    Embed the node features of both clouds.

    Arguments:
        features_x: The `(N, width)` source features.
        features_y: The `(M, width)` target features.
        params: The parameters.
        prefix: The transformer name.
        heads: The number of attention heads.
        layers: The number of encoder-decoder layers.

    Raises:
        ParameterError: When the widths differ or are not a multiple of `heads`.

    Returns:
        The embeddings `(T_X, T_Y)`, with the input widths.
    """
    if features_x.shape[1] != features_y.shape[1]:
        raise ParameterError(f"transformer: feature widths differ, {features_x.shape[1]} != {features_y.shape[1]}")
    if features_x.shape[1] % heads:
        raise ParameterError(f"transformer: width {features_x.shape[1]} is not a multiple of {heads} heads")

    embed_x, embed_y = features_x, features_y
    for layer in range(layers):
        base = f"{prefix}.layer{layer}"
        embed_x = ops.add(embed_x, multi_head_attention(embed_x, embed_x, params, f"{base}.self_attn", heads))
        embed_y = ops.add(embed_y, multi_head_attention(embed_y, embed_y, params, f"{base}.self_attn", heads))
        embed_x = ops.add(embed_x, feed_forward(embed_x, params, f"{base}.self_ffn"))
        embed_y = ops.add(embed_y, feed_forward(embed_y, params, f"{base}.self_ffn"))

        attended_x = multi_head_attention(embed_x, embed_y, params, f"{base}.cross_attn", heads)
        attended_y = multi_head_attention(embed_y, embed_x, params, f"{base}.cross_attn", heads)
        embed_x = ops.add(embed_x, attended_x)
        embed_y = ops.add(embed_y, attended_y)
        embed_x = ops.add(embed_x, feed_forward(embed_x, params, f"{base}.cross_ffn"))
        embed_y = ops.add(embed_y, feed_forward(embed_y, params, f"{base}.cross_ffn"))
    return embed_x, embed_y

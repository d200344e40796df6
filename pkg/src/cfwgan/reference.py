"""Published top-k results for MovieLens-100K and MovieLens-1M, used as comparison rows."""

COLUMNS = ("N5", "N20", "P5", "P20", "R5", "R20")

_ROWS = {
    "ML100K": {
        "ItemPop": (0.163, 0.195, 0.181, 0.138, 0.102, 0.251),
        "BPR": (0.370, 0.380, 0.348, 0.236, 0.116, 0.287),
        "FISM": (0.444, 0.436, 0.426, 0.281, 0.139, 0.342),
        "CDAE": (0.450, 0.436, 0.433, 0.288, 0.141, 0.358),
        "GraphGAN": (0.183, 0.249, 0.212, 0.151, 0.102, 0.260),
        "IRGAN": (0.342, 0.368, 0.312, 0.221, 0.107, 0.275),
        "CFGAN": (0.480, 0.441, 0.441, 0.302, 0.161, 0.361),
        "CFWGAN-GP": (0.461, 0.430, 0.423, 0.285, 0.148, 0.359),
        "MLC": (0.486, 0.448, 0.450, 0.300, 0.156, 0.365),
    },
    "ML1M": {
        "ItemPop": (0.154, 0.181, 0.157, 0.121, 0.076, 0.197),
        "BPR": (0.349, 0.362, 0.341, 0.252, 0.077, 0.208),
        "FISM": (0.427, 0.401, 0.408, 0.292, 0.098, 0.263),
        "CDAE": (0.441, 0.411, 0.411, 0.300, 0.102, 0.278),
        "GraphGAN": (0.205, 0.184, 0.178, 0.194, 0.070, 0.179),
        "IRGAN": (0.264, 0.246, 0.263, 0.214, 0.072, 0.166),
        "CFGAN": (0.442, 0.411, 0.423, 0.317, 0.110, 0.285),
        "CFWGAN-GP": (0.437, 0.390, 0.414, 0.296, 0.104, 0.260),
        "MLC": (0.472, 0.419, 0.446, 0.317, 0.111, 0.280),
    },
}

REFERENCE = {
    dataset: {name: dict(zip(COLUMNS, values)) for name, values in rows.items()}
    for dataset, rows in _ROWS.items()
}

# published row matching each runnable model kind
MODEL_ROW = {
    "CFWGAN_GP": "CFWGAN-GP",
    "CFGAN_VANILLA": "CFGAN",
    "MLC": "MLC",
    "ITEMPOP": "ItemPop",
}

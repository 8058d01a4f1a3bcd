from ibca.model.network import IBCANetwork, Variant, NetworkOutput  # noqa

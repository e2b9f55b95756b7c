from Equipoise.plugins import balance, estimate, simulate

ALL_PLUGINS = [estimate, balance, simulate]

"""Neural linear-chain CRFs for sequence verification."""

__all__: list[str] = []

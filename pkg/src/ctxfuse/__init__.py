"""Context-aware image fusion for duty-cycled sensor networks."""

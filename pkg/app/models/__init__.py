# Pydantic models per layer

# Engines and IO helpers

# Prequant Lab package

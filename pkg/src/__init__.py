# Thermal KMS toolkit package

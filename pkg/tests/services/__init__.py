# Test package for services

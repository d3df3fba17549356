# Cordes Test Suite

void s112(int n, int *a, int *b) {
    for (int i = n - 2; i >= 0; i--) {
        a[i + 1] = a[i] + b[i];
    }
}

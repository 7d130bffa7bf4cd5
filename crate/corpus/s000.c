void s000(int n, int *a, int *b) {
    for (int i = 0; i < n; i++) {
        a[i] = b[i] + 1;
    }
}
